#ifndef EZRL_DATA_HPP
#define EZRL_DATA_HPP

#include <istream>
#include <string>
#include <vector>

#include "ezrl/types.hpp"

namespace ezrl {

/// Daily closing prices, complete after ingestion: strictly increasing ISO
/// dates, positive prices, no missing cells.
struct PriceTable {
  std::vector<std::string> dates;
  std::vector<std::string> assets;
  MatrixXd prices;  // rows = dates, cols = assets

  Index n_rows() const { return prices.rows(); }
  Index n_assets() const { return prices.cols(); }
  void validate() const;
};

/// Simple per-period returns. Row t is the change from date t to t+1 of the
/// source price table and is labeled with the later date.
struct ReturnsTable {
  std::vector<std::string> dates;
  std::vector<std::string> assets;
  MatrixXd returns;

  Index n_rows() const { return returns.rows(); }
  Index n_assets() const { return returns.cols(); }
  void validate() const;
};

/// One chronological train/test split over return-row indices; both ranges
/// are half-open and the train range ends where the test range begins.
struct SplitSpec {
  int split_id = 0;           // 1-based
  double train_ratio = 0.0;
  Index train_begin = 0, train_end = 0;
  Index test_begin = 0, test_end = 0;
};

struct LoadOptions {
  double max_missing_frac = 0.10;  // drop assets missing in more rows than this
  char delim = ',';
};

/// Parses a delimited price file: header row of asset identifiers, first
/// column ISO dates (YYYY-MM-DD), one price per cell, empty cell = missing.
/// Rows are sorted by date; assets with insufficient history are dropped;
/// remaining gaps are forward-filled and leading rows that still have gaps
/// are removed. Throws std::runtime_error on malformed input and
/// std::invalid_argument when fewer than 2 rows or no assets survive.
PriceTable load_prices(const std::string& path, const LoadOptions& opts = {});
PriceTable parse_prices(std::istream& in, const LoadOptions& opts = {});

/// Per-column clamp bounds, from empirical quantiles.
struct WinsorBounds {
  VectorXd lo, hi;
};

/// Empirical q and 1-q quantiles of each column, by linear interpolation
/// between order statistics. q in [0, 0.5); q = 0 yields min/max bounds.
WinsorBounds fit_winsor_bounds(const MatrixXd& rows, double q);

/// Clamps each column into its bounds. Throws std::domain_error if any
/// clamped value is <= -1 (a gross return must stay positive).
MatrixXd apply_winsor_bounds(const MatrixXd& rows, const WinsorBounds& bounds);

/// Simple returns (P_t - P_{t-1}) / P_{t-1} with per-asset winsorization at
/// the [q, 1-q] quantiles of the full column. winsor_q = 0 disables
/// clamping exactly.
ReturnsTable compute_returns(const PriceTable& prices, double winsor_q = 0.005);

/// Chronological splits with train fraction interpolated linearly from
/// ratio_min to ratio_max; a single split uses ratio_min. Boundary index is
/// floor(ratio * n_rows). Throws if any split has an empty range.
std::vector<SplitSpec> make_splits(const ReturnsTable& returns, int n_splits,
                                   double ratio_min, double ratio_max);

/// Writes a returns table (or a row range of one) in the ingestion format.
void write_returns_csv(const ReturnsTable& table, const std::string& path,
                       Index row_begin, Index row_end);
void write_returns_csv(const ReturnsTable& table, const std::string& path);

/// Reads back a file produced by write_returns_csv.
ReturnsTable read_returns_csv(const std::string& path);

}  // namespace ezrl

#endif  // EZRL_DATA_HPP
