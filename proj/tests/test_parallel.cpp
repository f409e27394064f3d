#include <gtest/gtest.h>

#include <atomic>
#include <stdexcept>
#include <string>
#include <vector>

#include "difftraffic/parallel.hpp"

namespace dt = difftraffic;

namespace {

class Parallel : public ::testing::TestWithParam<int> {
 protected:
  void SetUp() override { dt::set_thread_count(GetParam()); }
  void TearDown() override { dt::set_thread_count(1); }
};

TEST_P(Parallel, VisitsEveryIndexOnce) {
  for (std::size_t n : {0u, 1u, 1000u, 5000u}) {
    std::vector<std::atomic<int>> hits(n);
    dt::parallel_for(n, [&](std::size_t i) { ++hits[i]; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
    std::vector<std::atomic<int>> tasks(n);
    dt::parallel_for_tasks(n, [&](std::size_t i) { ++tasks[i]; });
    for (const auto& h : tasks) EXPECT_EQ(h.load(), 1);
  }
}

TEST_P(Parallel, LowestIndexErrorWins) {
  auto body = [](std::size_t i) {
    if (i % 700 == 699) throw std::runtime_error(std::to_string(i));
  };
  try {
    dt::parallel_for(5000, body);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "699");
  }
  try {
    dt::parallel_for_tasks(5000, body);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "699");
  }
}

INSTANTIATE_TEST_SUITE_P(Threads, Parallel, ::testing::Values(1, 2, 4, 8));

TEST(ThreadCount, Positive) {
  EXPECT_GE(dt::thread_count(), 1);
  dt::set_thread_count(0);
  EXPECT_GE(dt::thread_count(), 1);
}

}  // namespace
