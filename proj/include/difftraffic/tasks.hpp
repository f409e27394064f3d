#pragma once

// Batched trajectory filtering (dense, noisy input) and reconstruction
// (sparse input). Both run the same fit; only the step size differs.

#include <span>
#include <vector>

#include "difftraffic/fit.hpp"
#include "difftraffic/parallel.hpp"
#include "difftraffic/trajectory.hpp"

namespace difftraffic {

/// Fits every trajectory independently; result order follows the input.
inline std::vector<FitResult> fit_corpus(std::span<const ObservedTrajectory> corpus,
                                         const FitOptions& options) {
  std::vector<FitResult> results(corpus.size());
  parallel_for_tasks(corpus.size(), [&](std::size_t i) { results[i] = fit(corpus[i], options); });
  return results;
}

inline std::vector<FitResult> run_filtering(std::span<const ObservedTrajectory> corpus,
                                            FitOptions options = {}) {
  return fit_corpus(corpus, options);
}

inline FitOptions reconstruction_defaults() {
  FitOptions options;
  options.dt = 1.0;
  return options;
}

inline std::vector<FitResult> run_reconstruction(std::span<const ObservedTrajectory> corpus,
                                                 FitOptions options = reconstruction_defaults()) {
  return fit_corpus(corpus, options);
}

}  // namespace difftraffic
