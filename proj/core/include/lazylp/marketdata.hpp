#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace lazylp {

struct Trade {
  std::int64_t timestamp_ms = 0;
  double price = 0.0;  // quote per base
  double size = 0.0;   // base units
};

// One second of aggregated activity. Volume is quote-denominated notional.
struct Bar {
  std::int64_t t = 0;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double volume = 0.0;

  friend bool operator==(const Bar&, const Bar&) = default;
};

struct SplitFractions {
  double train = 0.70;
  double validation = 0.15;
  double test = 0.15;
};

// Gap-free 1 Hz bars. split_marks = {end of train, end of validation}; both
// zero-width until split() is applied, in which case everything is "train".
class BarSeries {
 public:
  BarSeries() = default;
  explicit BarSeries(std::vector<Bar> bars);

  const std::vector<Bar>& bars() const noexcept { return bars_; }
  std::size_t size() const noexcept { return bars_.size(); }
  bool empty() const noexcept { return bars_.empty(); }
  const Bar& operator[](std::size_t i) const { return bars_[i]; }

  const std::array<std::size_t, 2>& split_marks() const noexcept { return marks_; }
  void set_split_marks(std::size_t train_end, std::size_t validation_end);

  std::span<const Bar> train() const;
  std::span<const Bar> validation() const;
  std::span<const Bar> test() const;

  std::vector<double> closes() const;

 private:
  std::vector<Bar> bars_;
  std::array<std::size_t, 2> marks_{0, 0};
};

// Buckets trades by floor(timestamp / 1s). Empty seconds between the first and
// last trade carry the previous close with zero volume.
BarSeries aggregate(std::span<const Trade> trades);

// Chronological split with floor-rounded boundaries.
BarSeries split(BarSeries series, const SplitFractions& fractions);

std::vector<Trade> read_trades_csv(const std::filesystem::path& path);
BarSeries read_bars_csv(const std::filesystem::path& path);
void write_bars_csv(const std::filesystem::path& path, std::span<const Bar> bars);

}  // namespace lazylp
