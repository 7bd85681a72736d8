#ifndef WEYLMA_UTIL_HPP
#define WEYLMA_UTIL_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace weylma {

/// SplitMix64 stream. Used everywhere randomness is needed so that runs are
/// reproducible bit-for-bit from a single seed, independent of the standard
/// library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

/// Pairwise (tree) summation: bit-stable regardless of future chunking and
/// more accurate than sequential accumulation on long quadrature sums.
double pairwise_sum(std::span<const double> values);

/// Format a double with 17 significant digits (lossless round-trip).
std::string format_g17(double value);

/// Write `content` to `path` atomically (temp file + rename).
void write_file_atomic(const std::string& path, const std::string& content);

/// Minimal CSV table writer with fixed 17-significant-digit numbers.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  void add_row(const std::vector<double>& values);
  void add_row_mixed(const std::vector<std::string>& values);
  const std::string& str() const { return buffer_; }
  void save(const std::string& path) const;

 private:
  std::size_t columns_;
  std::string buffer_;
};

}  // namespace weylma

#endif
