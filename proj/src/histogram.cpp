#include "towerlab/histogram.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>

namespace towerlab {

TailHistogram::TailHistogram(std::uint64_t cap) : cap_(cap), counts_(cap + 1, 0) {}

double TailHistogram::censored_fraction() const {
  return total_ == 0 ? 0.0 : static_cast<double>(censored_) / static_cast<double>(total_);
}

void TailHistogram::add(std::uint64_t value) { add(value, 1); }

void TailHistogram::add(std::uint64_t value, std::uint64_t count) {
  if (value > cap_) throw std::out_of_range("histogram value above cap; record it as censored");
  counts_[value] += count;
  total_ += count;
}

void TailHistogram::add_censored() {
  ++censored_;
  ++total_;
}

void TailHistogram::merge(const TailHistogram& other) {
  if (other.cap_ != cap_) throw std::invalid_argument("cannot merge histograms with different caps");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  total_ += other.total_;
  censored_ += other.censored_;
}

std::uint64_t TailHistogram::count(std::uint64_t value) const {
  return value <= cap_ ? counts_[value] : 0;
}

std::uint64_t TailHistogram::survivors(std::uint64_t n) const {
  if (n > cap_) return censored_;
  std::uint64_t below = 0;
  for (std::uint64_t v = 0; v < n; ++v) below += counts_[v];
  return total_ - below;
}

double TailHistogram::survival(std::uint64_t n) const {
  return total_ == 0 ? 0.0 : static_cast<double>(survivors(n)) / static_cast<double>(total_);
}

std::vector<std::uint64_t> TailHistogram::survivor_table() const {
  std::vector<std::uint64_t> table(cap_ + 2, 0);
  table[cap_ + 1] = censored_;
  for (std::uint64_t n = cap_ + 1; n-- > 0;) table[n] = table[n + 1] + counts_[n];
  return table;
}

std::uint64_t TailHistogram::max_observed() const {
  for (std::uint64_t v = cap_ + 1; v-- > 0;) {
    if (counts_[v] != 0) return v;
  }
  return 0;
}

double TailHistogram::mean_uncensored() const {
  double sum = 0.0;
  std::uint64_t n = 0;
  for (std::uint64_t v = 0; v <= cap_; ++v) {
    sum += static_cast<double>(v) * static_cast<double>(counts_[v]);
    n += counts_[v];
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

void write_tail_csv(std::ostream& out, const TailHistogram& hist, std::uint64_t first) {
  const auto table = hist.survivor_table();
  const std::uint64_t last = std::min(hist.cap(), hist.max_observed() + 1);
  out << "n,survivors,total,censored\n";
  for (std::uint64_t n = first; n <= last; ++n) {
    out << n << ',' << table[n] << ',' << hist.total() << ',' << hist.censored() << '\n';
  }
}

}  // namespace towerlab
