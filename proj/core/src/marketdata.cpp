#include "lazylp/marketdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "lazylp/csv.hpp"
#include "lazylp/error.hpp"

namespace lazylp {
namespace {

std::int64_t floor_seconds(std::int64_t ms) {
  std::int64_t q = ms / 1000;
  if (ms % 1000 != 0 && ms < 0) --q;
  return q;
}

void check_bar(const Bar& b) {
  const bool ok = b.open > 0 && b.close > 0 && b.low > 0 && b.low <= b.open && b.open <= b.high &&
                  b.low <= b.close && b.close <= b.high && b.volume >= 0;
  if (!ok) throw Error(ErrorCode::DomainError, "malformed bar at t=" + std::to_string(b.t));
}

}  // namespace

BarSeries::BarSeries(std::vector<Bar> bars) : bars_(std::move(bars)) {
  for (std::size_t i = 0; i < bars_.size(); ++i) {
    check_bar(bars_[i]);
    if (i > 0 && bars_[i].t != bars_[i - 1].t + 1) {
      throw Error(ErrorCode::UnsortedInput, "bar timestamps must be consecutive seconds");
    }
  }
  marks_ = {bars_.size(), bars_.size()};
}

void BarSeries::set_split_marks(std::size_t train_end, std::size_t validation_end) {
  if (train_end > validation_end || validation_end > bars_.size()) {
    throw Error(ErrorCode::DomainError, "split marks out of order or out of bounds");
  }
  marks_ = {train_end, validation_end};
}

std::span<const Bar> BarSeries::train() const {
  return std::span<const Bar>(bars_).subspan(0, marks_[0]);
}

std::span<const Bar> BarSeries::validation() const {
  return std::span<const Bar>(bars_).subspan(marks_[0], marks_[1] - marks_[0]);
}

std::span<const Bar> BarSeries::test() const {
  return std::span<const Bar>(bars_).subspan(marks_[1]);
}

std::vector<double> BarSeries::closes() const {
  std::vector<double> out(bars_.size());
  std::transform(bars_.begin(), bars_.end(), out.begin(), [](const Bar& b) { return b.close; });
  return out;
}

BarSeries aggregate(std::span<const Trade> trades) {
  if (trades.empty()) throw Error(ErrorCode::EmptyData, "no trades to aggregate");
  for (std::size_t i = 0; i < trades.size(); ++i) {
    if (!(trades[i].price > 0) || !(trades[i].size > 0)) {
      throw Error(ErrorCode::DomainError, "trade price and size must be positive");
    }
    if (i > 0 && trades[i].timestamp_ms < trades[i - 1].timestamp_ms) {
      throw Error(ErrorCode::UnsortedInput, "trade timestamps decrease at row " + std::to_string(i));
    }
  }

  const std::int64_t first = floor_seconds(trades.front().timestamp_ms);
  const std::int64_t last = floor_seconds(trades.back().timestamp_ms);
  std::vector<Bar> bars;
  bars.reserve(static_cast<std::size_t>(last - first + 1));

  std::size_t k = 0;
  for (std::int64_t t = first; t <= last; ++t) {
    Bar bar{.t = t};
    bool touched = false;
    while (k < trades.size() && floor_seconds(trades[k].timestamp_ms) == t) {
      const Trade& tr = trades[k++];
      if (!touched) {
        bar.open = bar.high = bar.low = tr.price;
        touched = true;
      }
      bar.high = std::max(bar.high, tr.price);
      bar.low = std::min(bar.low, tr.price);
      bar.close = tr.price;
      bar.volume += tr.price * tr.size;
    }
    if (!touched) {
      const double prev = bars.back().close;
      bar.open = bar.high = bar.low = bar.close = prev;
    }
    bars.push_back(bar);
  }
  return BarSeries(std::move(bars));
}

BarSeries split(BarSeries series, const SplitFractions& f) {
  if (!(f.train > 0 && f.validation > 0 && f.test > 0) ||
      std::abs(f.train + f.validation + f.test - 1.0) > 1e-9) {
    throw Error(ErrorCode::DomainError, "split fractions must be positive and sum to 1");
  }
  if (series.size() < 3) throw Error(ErrorCode::InsufficientData, "need at least 3 bars to split");
  const double n = static_cast<double>(series.size());
  // The 1e-9 nudge keeps exact products like 100 * 0.85 from flooring to 84.
  const auto train_end = static_cast<std::size_t>(std::floor(n * f.train + 1e-9));
  const auto val_end = static_cast<std::size_t>(std::floor(n * (f.train + f.validation) + 1e-9));
  series.set_split_marks(train_end, std::min(val_end, series.size()));
  return series;
}

std::vector<Trade> read_trades_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  csv::require_header(table, {"timestamp_ms", "price", "size"}, "trade CSV");
  std::vector<Trade> trades;
  trades.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    trades.push_back({csv::to_int(row[0]), csv::to_double(row[1]), csv::to_double(row[2])});
  }
  return trades;
}

BarSeries read_bars_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  csv::require_header(table, {"t", "open", "high", "low", "close", "volume"}, "bar CSV");
  std::vector<Bar> bars;
  bars.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    bars.push_back({csv::to_int(row[0]), csv::to_double(row[1]), csv::to_double(row[2]),
                    csv::to_double(row[3]), csv::to_double(row[4]), csv::to_double(row[5])});
  }
  if (bars.empty()) throw Error(ErrorCode::EmptyData, "bar CSV has no rows");
  return BarSeries(std::move(bars));
}

void write_bars_csv(const std::filesystem::path& path, std::span<const Bar> bars) {
  auto out = csv::open_for_write(path);
  out << "t,open,high,low,close,volume\n";
  for (const Bar& b : bars) {
    out << b.t << ',' << csv::format(b.open) << ',' << csv::format(b.high) << ','
        << csv::format(b.low) << ',' << csv::format(b.close) << ',' << csv::format(b.volume)
        << '\n';
  }
}

}  // namespace lazylp
