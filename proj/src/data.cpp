#include "ezrl/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "ezrl/csv.hpp"

namespace ezrl {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

bool is_iso_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  }
  return true;
}

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

double parse_price_cell(const std::string& cell, const std::string& date,
                        const std::string& asset) {
  if (is_blank(cell)) return kMissing;
  size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("load_prices: unparseable price '" + cell + "' for " +
                             asset + " on " + date);
  }
  while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos])))
    ++pos;
  if (pos != cell.size())
    throw std::runtime_error("load_prices: unparseable price '" + cell + "' for " +
                             asset + " on " + date);
  if (!(v > 0.0) || !std::isfinite(v))
    throw std::runtime_error("load_prices: nonpositive price for " + asset +
                             " on " + date);
  return v;
}

// Linear interpolation between order statistics of a sorted sample.
double interpolated_quantile(std::vector<double> sorted, double q) {
  const size_t m = sorted.size();
  if (m == 0) throw std::invalid_argument("quantile of empty sample");
  const double h = q * double(m - 1);
  const size_t lo = size_t(std::floor(h));
  if (lo + 1 >= m) return sorted[m - 1];
  const double frac = h - double(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

void PriceTable::validate() const {
  if (Index(dates.size()) != prices.rows() || Index(assets.size()) != prices.cols())
    throw std::invalid_argument("PriceTable: shape mismatch");
  if (prices.rows() < 2)
    throw std::invalid_argument("PriceTable: fewer than 2 rows");
  if (prices.cols() < 1) throw std::invalid_argument("PriceTable: no assets");
  for (size_t i = 1; i < dates.size(); ++i) {
    if (!(dates[i - 1] < dates[i]))
      throw std::invalid_argument("PriceTable: dates not strictly increasing");
  }
  if (!(prices.array() > 0.0).all() || !prices.allFinite())
    throw std::invalid_argument("PriceTable: prices must be positive and complete");
}

void ReturnsTable::validate() const {
  if (Index(dates.size()) != returns.rows() || Index(assets.size()) != returns.cols())
    throw std::invalid_argument("ReturnsTable: shape mismatch");
  if (returns.rows() < 1) throw std::invalid_argument("ReturnsTable: empty");
  if (!(returns.array() > -1.0).all() || !returns.allFinite())
    throw std::invalid_argument("ReturnsTable: returns must exceed -1");
}

PriceTable parse_prices(std::istream& in, const LoadOptions& opts) {
  const CsvTable raw = [&] {
    try {
      return read_csv(in, opts.delim);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(std::string("load_prices: ") + e.what());
    }
  }();
  if (raw.n_cols() < 2)
    throw std::runtime_error("load_prices: need a date column plus at least one asset");
  if (raw.n_rows() < 2)
    throw std::invalid_argument("load_prices: fewer than 2 data rows");

  const Index n_in = Index(raw.n_cols()) - 1;
  std::vector<std::string> assets_in(raw.header.begin() + 1, raw.header.end());

  // Parse and sort rows chronologically; ISO dates sort lexicographically.
  std::vector<std::string> dates(raw.n_rows());
  MatrixXd cells(Index(raw.n_rows()), n_in);
  for (size_t r = 0; r < raw.n_rows(); ++r) {
    const auto& row = raw.rows[r];
    if (!is_iso_date(row[0]))
      throw std::runtime_error("load_prices: bad date '" + row[0] + "'");
    dates[r] = row[0];
    for (Index c = 0; c < n_in; ++c)
      cells(Index(r), c) = parse_price_cell(row[size_t(c) + 1], row[0],
                                            assets_in[size_t(c)]);
  }
  std::vector<size_t> order(dates.size());
  std::iota(order.begin(), order.end(), size_t(0));
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return dates[a] < dates[b]; });
  for (size_t i = 1; i < order.size(); ++i) {
    if (dates[order[i - 1]] == dates[order[i]])
      throw std::runtime_error("load_prices: duplicate date " + dates[order[i]]);
  }

  const Index T = Index(dates.size());
  std::vector<std::string> sorted_dates(dates.size());
  MatrixXd sorted(T, n_in);
  for (Index r = 0; r < T; ++r) {
    sorted_dates[size_t(r)] = dates[order[size_t(r)]];
    sorted.row(r) = cells.row(Index(order[size_t(r)]));
  }

  // Sufficient-history filter, then forward fill, then trim leading gaps.
  std::vector<Index> kept;
  for (Index c = 0; c < n_in; ++c) {
    const Index missing = Index((sorted.col(c).array().isNaN()).count());
    if (double(missing) <= opts.max_missing_frac * double(T)) kept.push_back(c);
  }
  if (kept.empty())
    throw std::invalid_argument("load_prices: no assets with sufficient history");

  PriceTable out;
  out.dates = std::move(sorted_dates);
  out.assets.reserve(kept.size());
  out.prices.resize(T, Index(kept.size()));
  for (size_t j = 0; j < kept.size(); ++j) {
    out.assets.push_back(assets_in[size_t(kept[j])]);
    out.prices.col(Index(j)) = sorted.col(kept[j]);
  }
  for (Index c = 0; c < out.prices.cols(); ++c) {
    double last = kMissing;
    for (Index r = 0; r < T; ++r) {
      if (std::isnan(out.prices(r, c)))
        out.prices(r, c) = last;
      else
        last = out.prices(r, c);
    }
  }
  Index first_complete = 0;
  while (first_complete < T &&
         out.prices.row(first_complete).array().isNaN().any())
    ++first_complete;
  if (first_complete > 0) {
    out.dates.erase(out.dates.begin(), out.dates.begin() + first_complete);
    out.prices = out.prices.bottomRows(T - first_complete).eval();
  }
  if (out.prices.rows() < 2)
    throw std::invalid_argument("load_prices: fewer than 2 complete rows");
  out.validate();
  return out;
}

PriceTable load_prices(const std::string& path, const LoadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_prices: cannot open " + path);
  return parse_prices(in, opts);
}

WinsorBounds fit_winsor_bounds(const MatrixXd& rows, double q) {
  if (!(q >= 0.0 && q < 0.5))
    throw std::invalid_argument("fit_winsor_bounds: q must lie in [0, 0.5)");
  if (rows.rows() < 1) throw std::invalid_argument("fit_winsor_bounds: empty");
  WinsorBounds b;
  b.lo.resize(rows.cols());
  b.hi.resize(rows.cols());
  for (Index c = 0; c < rows.cols(); ++c) {
    std::vector<double> col(rows.col(c).data(), rows.col(c).data() + rows.rows());
    std::sort(col.begin(), col.end());
    b.lo[c] = interpolated_quantile(col, q);
    b.hi[c] = interpolated_quantile(col, 1.0 - q);
  }
  return b;
}

MatrixXd apply_winsor_bounds(const MatrixXd& rows, const WinsorBounds& bounds) {
  if (bounds.lo.size() != rows.cols() || bounds.hi.size() != rows.cols())
    throw std::invalid_argument("apply_winsor_bounds: bounds size mismatch");
  MatrixXd out = rows;
  for (Index c = 0; c < rows.cols(); ++c) {
    out.col(c) = out.col(c).cwiseMax(bounds.lo[c]).cwiseMin(bounds.hi[c]);
  }
  if (!(out.array() > -1.0).all())
    throw std::domain_error("apply_winsor_bounds: clamped return <= -1");
  return out;
}

ReturnsTable compute_returns(const PriceTable& prices, double winsor_q) {
  prices.validate();
  const Index T = prices.n_rows();
  ReturnsTable out;
  out.assets = prices.assets;
  out.dates.assign(prices.dates.begin() + 1, prices.dates.end());
  out.returns = (prices.prices.bottomRows(T - 1).array() /
                     prices.prices.topRows(T - 1).array() -
                 1.0)
                    .matrix();
  if (winsor_q > 0.0) {
    out.returns =
        apply_winsor_bounds(out.returns, fit_winsor_bounds(out.returns, winsor_q));
  }
  out.validate();
  return out;
}

std::vector<SplitSpec> make_splits(const ReturnsTable& returns, int n_splits,
                                   double ratio_min, double ratio_max) {
  returns.validate();
  if (n_splits < 1) throw std::invalid_argument("make_splits: n_splits must be >= 1");
  if (!(ratio_min > 0.0 && ratio_min <= ratio_max && ratio_max < 1.0))
    throw std::invalid_argument("make_splits: need 0 < ratio_min <= ratio_max < 1");
  const Index R = returns.n_rows();
  std::vector<SplitSpec> out;
  out.reserve(size_t(n_splits));
  for (int k = 0; k < n_splits; ++k) {
    SplitSpec s;
    s.split_id = k + 1;
    s.train_ratio = n_splits == 1 ? ratio_min
                                  : ratio_min + (ratio_max - ratio_min) *
                                                    double(k) / double(n_splits - 1);
    const Index boundary = Index(std::floor(s.train_ratio * double(R)));
    s.train_begin = 0;
    s.train_end = boundary;
    s.test_begin = boundary;
    s.test_end = R;
    if (s.train_end <= s.train_begin || s.test_end <= s.test_begin)
      throw std::invalid_argument("make_splits: split " + std::to_string(s.split_id) +
                                  " has an empty range");
    out.push_back(s);
  }
  return out;
}

void write_returns_csv(const ReturnsTable& table, const std::string& path,
                       Index row_begin, Index row_end) {
  if (row_begin < 0 || row_end > table.n_rows() || row_begin >= row_end)
    throw std::invalid_argument("write_returns_csv: bad row range");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_returns_csv: cannot open " + path);
  out << "date";
  for (const auto& a : table.assets) out << ',' << a;
  out << '\n';
  char buf[64];
  for (Index r = row_begin; r < row_end; ++r) {
    out << table.dates[size_t(r)];
    for (Index c = 0; c < table.n_assets(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", table.returns(r, c));
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write_returns_csv: write failed for " + path);
}

void write_returns_csv(const ReturnsTable& table, const std::string& path) {
  write_returns_csv(table, path, 0, table.n_rows());
}

ReturnsTable read_returns_csv(const std::string& path) {
  const CsvTable raw = read_csv_file(path);
  if (raw.n_cols() < 2 || raw.n_rows() < 1)
    throw std::runtime_error("read_returns_csv: malformed " + path);
  ReturnsTable out;
  out.assets.assign(raw.header.begin() + 1, raw.header.end());
  out.dates.reserve(raw.n_rows());
  out.returns.resize(Index(raw.n_rows()), Index(raw.n_cols()) - 1);
  for (size_t r = 0; r < raw.n_rows(); ++r) {
    out.dates.push_back(raw.rows[r][0]);
    for (size_t c = 1; c < raw.n_cols(); ++c) {
      out.returns(Index(r), Index(c) - 1) = std::stod(raw.rows[r][c]);
    }
  }
  out.validate();
  return out;
}

}  // namespace ezrl
