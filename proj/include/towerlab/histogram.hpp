#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace towerlab {

// Counts of a nonnegative integer variable V observed up to a cap. Values
// beyond the cap are recorded as censored (true value > cap), so the survival
// P(V >= n) is exact for every n <= cap + 1.
class TailHistogram {
 public:
  TailHistogram() = default;
  explicit TailHistogram(std::uint64_t cap);

  std::uint64_t cap() const { return cap_; }
  std::uint64_t total() const { return total_; }
  std::uint64_t censored() const { return censored_; }
  double censored_fraction() const;

  void add(std::uint64_t value);
  void add_censored();
  // Adds `count` observations of `value` at once.
  void add(std::uint64_t value, std::uint64_t count);

  // Additive and order-independent; caps must agree.
  void merge(const TailHistogram& other);

  std::uint64_t count(std::uint64_t value) const;
  // #{V >= n}; for n > cap this is the censored count.
  std::uint64_t survivors(std::uint64_t n) const;
  double survival(std::uint64_t n) const;
  // Table S[n] = #{V >= n} for n = 0..cap+1.
  std::vector<std::uint64_t> survivor_table() const;
  // Largest uncensored value with a nonzero count (0 if none).
  std::uint64_t max_observed() const;
  double mean_uncensored() const;

  const std::vector<std::uint64_t>& counts() const { return counts_; }

  friend bool operator==(const TailHistogram&, const TailHistogram&) = default;

 private:
  std::uint64_t cap_ = 0;
  std::uint64_t total_ = 0;
  std::uint64_t censored_ = 0;
  std::vector<std::uint64_t> counts_;  // counts_[v] for v = 0..cap
};

// CSV with columns n, survivors, total, censored for n = first..last where
// last = min(cap, max_observed + 1).
void write_tail_csv(std::ostream& out, const TailHistogram& hist, std::uint64_t first = 1);

}  // namespace towerlab
