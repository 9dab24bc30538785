#include "data_model.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "errors.hpp"
#include "rng.hpp"

namespace bridgeiv {

namespace {

std::string row_msg(const std::string& path, std::size_t line, const std::string& what) {
  std::ostringstream msg;
  msg << path << ":" << line << ": " << what;
  return msg.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

double parse_double_field(const std::string& field, const std::string& path, std::size_t line) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw_data(row_msg(path, line, "cannot parse numeric field '" + field + "'"));
  }
  return value;
}

std::int64_t parse_int_field(const std::string& field, const std::string& path, std::size_t line) {
  std::int64_t value = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw_data(row_msg(path, line, "cannot parse integer field '" + field + "'"));
  }
  return value;
}

std::string aggregate_header(int dim) {
  std::string header = "cell_id,fold_id,count";
  for (int j = 1; j <= dim; ++j) header += ",s_mean_" + std::to_string(j);
  header += ",y_mean";
  return header;
}

std::string unit_header(int dim) {
  std::string header = "cell_id,fold_id";
  for (int j = 1; j <= dim; ++j) header += ",s_" + std::to_string(j);
  header += ",y";
  return header;
}

// Surrogate dimension implied by a header with `extra` non-surrogate columns.
int dim_from_header(const std::string& header, int extra_columns, const std::string& path) {
  const auto fields = split_csv_line(header);
  const int dim = static_cast<int>(fields.size()) - extra_columns;
  if (dim < 1) throw_data(row_msg(path, 1, "malformed header: too few columns"));
  return dim;
}

}  // namespace

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

Dataset::Dataset(int num_cells, int surrogate_dim, int units_per_cell, int num_folds)
    : num_cells_(num_cells),
      num_folds_(num_folds),
      surrogate_dim_(surrogate_dim),
      units_per_cell_(units_per_cell) {
  if (num_cells < 1 || surrogate_dim < 1 || units_per_cell < 1 || num_folds < 0) {
    throw_config("Dataset: num_cells, surrogate_dim and units_per_cell must be positive");
  }
  const std::int64_t total =
      static_cast<std::int64_t>(num_cells) * static_cast<std::int64_t>(units_per_cell);
  cell_ids_.reserve(total);
  fold_ids_.reserve(total);
  outcomes_.reserve(total);
  surrogates_.resize(total, surrogate_dim);
}

void Dataset::add(std::int32_t cell_id, std::int32_t fold_id,
                  const Eigen::RowVectorXd& surrogate, double outcome) {
  if (cell_id < 1 || cell_id > num_cells_) {
    throw_data("record cell_id " + std::to_string(cell_id) + " outside [1, " +
               std::to_string(num_cells_) + "]");
  }
  if (fold_id < 0 || (num_folds_ > 0 && fold_id > num_folds_)) {
    throw_data("record fold_id " + std::to_string(fold_id) + " outside [1, " +
               std::to_string(num_folds_) + "]");
  }
  if (surrogate.size() != surrogate_dim_) {
    throw_data("surrogate length " + std::to_string(surrogate.size()) +
               " does not match declared dimension " + std::to_string(surrogate_dim_));
  }
  if (rows_used_ >= surrogates_.rows()) {
    throw_data("dataset already holds the declared " + std::to_string(surrogates_.rows()) +
               " records");
  }
  cell_ids_.push_back(cell_id);
  fold_ids_.push_back(fold_id);
  surrogates_.row(rows_used_) = surrogate;
  outcomes_.push_back(outcome);
  ++rows_used_;
}

void Dataset::add(const UnitRecord& record) {
  add(record.cell_id, record.fold_id, record.surrogate, record.outcome);
}

UnitRecord Dataset::record(std::int64_t i) const {
  return UnitRecord{cell_ids_[i], fold_ids_[i], surrogates_.row(i), outcomes_[i]};
}

void Dataset::validate() const {
  const std::int64_t expected =
      static_cast<std::int64_t>(num_cells_) * static_cast<std::int64_t>(units_per_cell_);
  if (size() != expected) {
    throw_data("dataset holds " + std::to_string(size()) + " records, expected " +
               std::to_string(expected));
  }
  std::vector<std::int64_t> cell_counts(num_cells_, 0);
  std::vector<std::int64_t> fold_counts;
  if (num_folds_ > 0) {
    fold_counts.assign(static_cast<std::size_t>(num_cells_) * num_folds_, 0);
  }
  for (std::int64_t i = 0; i < size(); ++i) {
    ++cell_counts[cell_ids_[i] - 1];
    if (num_folds_ > 0) {
      if (fold_ids_[i] < 1 || fold_ids_[i] > num_folds_) {
        throw_data("record " + std::to_string(i) + " has fold_id " +
                   std::to_string(fold_ids_[i]) + " outside [1, " +
                   std::to_string(num_folds_) + "]");
      }
      ++fold_counts[static_cast<std::size_t>(cell_ids_[i] - 1) * num_folds_ + fold_ids_[i] - 1];
    }
  }
  for (int a = 0; a < num_cells_; ++a) {
    if (cell_counts[a] != units_per_cell_) {
      throw_data("cell " + std::to_string(a + 1) + " holds " + std::to_string(cell_counts[a]) +
                 " records, expected " + std::to_string(units_per_cell_));
    }
    if (num_folds_ > 0) {
      std::int64_t lo = units_per_cell_;
      std::int64_t hi = 0;
      for (int v = 0; v < num_folds_; ++v) {
        const std::int64_t c = fold_counts[static_cast<std::size_t>(a) * num_folds_ + v];
        lo = std::min(lo, c);
        hi = std::max(hi, c);
      }
      if (hi - lo > 1) {
        throw_data("cell " + std::to_string(a + 1) + " fold sizes differ by more than 1");
      }
    }
  }
}

Dataset assign_folds(const Dataset& dataset, int num_folds, std::uint64_t seed) {
  if (num_folds < 2) throw_config("assign_folds: need at least 2 folds");

  Dataset out(dataset.num_cells(), dataset.surrogate_dim(), dataset.units_per_cell(), num_folds);
  out.cell_ids_ = dataset.cell_ids_;
  out.surrogates_ = dataset.surrogates_;
  out.outcomes_ = dataset.outcomes_;
  out.rows_used_ = dataset.rows_used_;
  out.fold_ids_.assign(dataset.cell_ids_.size(), 0);

  std::vector<std::vector<std::int64_t>> by_cell(dataset.num_cells());
  for (std::int64_t i = 0; i < dataset.size(); ++i) {
    by_cell[dataset.cell_id(i) - 1].push_back(i);
  }

  std::vector<std::int32_t> labels;
  std::vector<std::int32_t> fold_order(num_folds);
  for (int a = 0; a < dataset.num_cells(); ++a) {
    const auto& idx = by_cell[a];
    if (static_cast<int>(idx.size()) < num_folds) {
      throw_data("cell " + std::to_string(a + 1) + " has " + std::to_string(idx.size()) +
                 " units, fewer than " + std::to_string(num_folds) + " folds");
    }
    PhiloxRng rng(seed, static_cast<std::uint64_t>(a));
    // Random fold order decides which folds receive the extra unit when the
    // cell size is not divisible by L; the label shuffle then makes the
    // balanced assignment uniform.
    std::iota(fold_order.begin(), fold_order.end(), 1);
    std::shuffle(fold_order.begin(), fold_order.end(), rng);
    labels.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      labels[i] = fold_order[i % num_folds];
    }
    std::shuffle(labels.begin(), labels.end(), rng);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out.fold_ids_[idx[i]] = labels[i];
    }
  }
  out.validate();
  return out;
}

std::vector<CellFoldAggregate> aggregate(const Dataset& dataset) {
  if (!dataset.folds_assigned()) throw_data("aggregate: fold labels not assigned");
  dataset.validate();

  const int num_cells = dataset.num_cells();
  const int num_folds = dataset.num_folds();
  const int dim = dataset.surrogate_dim();
  const std::size_t groups = static_cast<std::size_t>(num_cells) * num_folds;

  Eigen::MatrixXd s_sums = Eigen::MatrixXd::Zero(groups, dim);
  std::vector<double> y_sums(groups, 0.0);
  std::vector<std::int64_t> counts(groups, 0);

  for (std::int64_t i = 0; i < dataset.size(); ++i) {
    const std::size_t g =
        static_cast<std::size_t>(dataset.cell_id(i) - 1) * num_folds + dataset.fold_id(i) - 1;
    s_sums.row(g) += dataset.surrogate(i);
    y_sums[g] += dataset.outcome(i);
    ++counts[g];
  }

  std::vector<CellFoldAggregate> out;
  out.reserve(groups);
  for (int a = 1; a <= num_cells; ++a) {
    for (int v = 1; v <= num_folds; ++v) {
      const std::size_t g = static_cast<std::size_t>(a - 1) * num_folds + v - 1;
      CellFoldAggregate agg;
      agg.cell_id = a;
      agg.fold_id = v;
      agg.count = counts[g];
      agg.mean_surrogate = s_sums.row(g) / static_cast<double>(counts[g]);
      agg.mean_outcome = y_sums[g] / static_cast<double>(counts[g]);
      out.push_back(std::move(agg));
    }
  }
  return out;
}

void write_aggregate_csv(const std::vector<CellFoldAggregate>& aggregates,
                         const std::string& path) {
  if (aggregates.empty()) throw_data("write_aggregate_csv: no aggregates");
  const int dim = static_cast<int>(aggregates.front().mean_surrogate.size());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot open '" + path + "' for writing");
  out << aggregate_header(dim) << "\n";
  for (const auto& agg : aggregates) {
    if (agg.mean_surrogate.size() != dim) {
      throw_data("write_aggregate_csv: inconsistent surrogate dimension");
    }
    out << agg.cell_id << "," << agg.fold_id << "," << agg.count;
    for (int j = 0; j < dim; ++j) out << "," << format_double(agg.mean_surrogate(j));
    out << "," << format_double(agg.mean_outcome) << "\n";
  }
  if (!out) throw_io("failed writing '" + path + "'");
}

std::vector<CellFoldAggregate> read_aggregate_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line)) throw_data(row_msg(path, 1, "empty file"));
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const int dim = dim_from_header(line, 4, path);
  if (line != aggregate_header(dim)) {
    throw_data(row_msg(path, 1, "malformed header, expected '" + aggregate_header(dim) + "'"));
  }

  std::vector<CellFoldAggregate> out;
  std::map<std::pair<std::int32_t, std::int32_t>, std::size_t> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != dim + 4) {
      throw_data(row_msg(path, line_no,
                         "expected " + std::to_string(dim + 4) + " fields (surrogate dimension " +
                             std::to_string(dim) + "), found " + std::to_string(fields.size())));
    }
    CellFoldAggregate agg;
    agg.cell_id = static_cast<std::int32_t>(parse_int_field(fields[0], path, line_no));
    agg.fold_id = static_cast<std::int32_t>(parse_int_field(fields[1], path, line_no));
    agg.count = parse_int_field(fields[2], path, line_no);
    if (agg.count <= 0) throw_data(row_msg(path, line_no, "count must be positive"));
    agg.mean_surrogate.resize(dim);
    for (int j = 0; j < dim; ++j) {
      agg.mean_surrogate(j) = parse_double_field(fields[3 + j], path, line_no);
    }
    agg.mean_outcome = parse_double_field(fields[3 + dim], path, line_no);
    const auto key = std::make_pair(agg.cell_id, agg.fold_id);
    const auto [it, inserted] = seen.emplace(key, line_no);
    if (!inserted) {
      throw_data(row_msg(path, line_no,
                         "duplicate (cell_id=" + std::to_string(agg.cell_id) + ", fold_id=" +
                             std::to_string(agg.fold_id) + ") key, first seen at row " +
                             std::to_string(it->second)));
    }
    out.push_back(std::move(agg));
  }
  if (out.empty()) throw_data(row_msg(path, line_no, "no aggregate rows"));
  return out;
}

void write_unit_csv(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot open '" + path + "' for writing");
  out << unit_header(dataset.surrogate_dim()) << "\n";
  for (std::int64_t i = 0; i < dataset.size(); ++i) {
    out << dataset.cell_id(i) << "," << dataset.fold_id(i);
    for (int j = 0; j < dataset.surrogate_dim(); ++j) {
      out << "," << format_double(dataset.surrogate(i)(j));
    }
    out << "," << format_double(dataset.outcome(i)) << "\n";
  }
  if (!out) throw_io("failed writing '" + path + "'");
}

Dataset read_unit_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line)) throw_data(row_msg(path, 1, "empty file"));
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const int dim = dim_from_header(line, 3, path);
  if (line != unit_header(dim)) {
    throw_data(row_msg(path, 1, "malformed header, expected '" + unit_header(dim) + "'"));
  }

  struct Row {
    std::int32_t cell;
    std::int32_t fold;
    Eigen::RowVectorXd s;
    double y;
  };
  std::vector<Row> rows;
  std::size_t line_no = 1;
  std::int32_t max_cell = 0;
  std::int32_t max_fold = 0;
  bool any_unassigned = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != dim + 3) {
      throw_data(row_msg(path, line_no,
                         "expected " + std::to_string(dim + 3) + " fields (surrogate dimension " +
                             std::to_string(dim) + "), found " + std::to_string(fields.size())));
    }
    Row row;
    row.cell = static_cast<std::int32_t>(parse_int_field(fields[0], path, line_no));
    row.fold = static_cast<std::int32_t>(parse_int_field(fields[1], path, line_no));
    if (row.cell < 1) throw_data(row_msg(path, line_no, "cell_id must be >= 1"));
    if (row.fold < 0) throw_data(row_msg(path, line_no, "fold_id must be >= 0"));
    any_unassigned = any_unassigned || row.fold == 0;
    row.s.resize(dim);
    for (int j = 0; j < dim; ++j) row.s(j) = parse_double_field(fields[2 + j], path, line_no);
    row.y = parse_double_field(fields[2 + dim], path, line_no);
    max_cell = std::max(max_cell, row.cell);
    max_fold = std::max(max_fold, row.fold);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw_data(row_msg(path, line_no, "no unit rows"));
  if (any_unassigned && max_fold > 0) {
    throw_data(path + ": mixes assigned and unassigned fold labels");
  }
  if (rows.size() % max_cell != 0) {
    throw_data(path + ": " + std::to_string(rows.size()) + " records cannot fill " +
               std::to_string(max_cell) + " equal cells");
  }
  const int units_per_cell = static_cast<int>(rows.size() / max_cell);
  Dataset dataset(max_cell, dim, units_per_cell, max_fold);
  for (const auto& row : rows) dataset.add(row.cell, row.fold, row.s, row.y);
  dataset.validate();
  return dataset;
}

}  // namespace bridgeiv
