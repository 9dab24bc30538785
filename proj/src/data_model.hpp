#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace bridgeiv {

// One unit's experiment-log row: cell assignment, fold label, short-term
// surrogate vector and long-term outcome. fold_id 0 means "not yet assigned".
struct UnitRecord {
  std::int32_t cell_id = 0;  // 1..K
  std::int32_t fold_id = 0;  // 1..L, or 0 when unassigned
  Eigen::RowVectorXd surrogate;
  double outcome = 0.0;
};

// Unit-level experiment data for K cells with n units each. Storage is
// columnar so estimators can run over contiguous arrays; record(i)
// materializes a row view when needed.
class Dataset {
 public:
  Dataset(int num_cells, int surrogate_dim, int units_per_cell, int num_folds = 0);

  void add(std::int32_t cell_id, std::int32_t fold_id,
           const Eigen::RowVectorXd& surrogate, double outcome);
  void add(const UnitRecord& record);

  // Checks the declared shape: every cell holds exactly units_per_cell
  // records, fold labels are in range and, when assigned, fold sizes within
  // each cell differ by at most one. Throws a data error otherwise.
  void validate() const;

  int num_cells() const { return num_cells_; }
  int num_folds() const { return num_folds_; }
  int surrogate_dim() const { return surrogate_dim_; }
  int units_per_cell() const { return units_per_cell_; }
  std::int64_t size() const { return static_cast<std::int64_t>(cell_ids_.size()); }
  bool folds_assigned() const { return num_folds_ > 0; }

  std::int32_t cell_id(std::int64_t i) const { return cell_ids_[i]; }
  std::int32_t fold_id(std::int64_t i) const { return fold_ids_[i]; }
  double outcome(std::int64_t i) const { return outcomes_[i]; }
  Eigen::MatrixXd::ConstRowXpr surrogate(std::int64_t i) const { return surrogates_.row(i); }
  UnitRecord record(std::int64_t i) const;

  const Eigen::MatrixXd& surrogates() const { return surrogates_; }
  const std::vector<double>& outcomes() const { return outcomes_; }

 private:
  friend Dataset assign_folds(const Dataset&, int, std::uint64_t);

  int num_cells_;
  int num_folds_;
  int surrogate_dim_;
  int units_per_cell_;
  std::vector<std::int32_t> cell_ids_;
  std::vector<std::int32_t> fold_ids_;
  Eigen::MatrixXd surrogates_;  // size() x d, grown geometrically
  std::vector<double> outcomes_;
  std::int64_t rows_used_ = 0;
};

// Per-(cell, fold) sample means and unit count: the sufficient statistic
// for the cross-fold estimators.
struct CellFoldAggregate {
  std::int32_t cell_id = 0;
  std::int32_t fold_id = 0;
  Eigen::RowVectorXd mean_surrogate;
  double mean_outcome = 0.0;
  std::int64_t count = 0;
};

// Balanced random fold assignment within each cell: a seeded permutation of
// the label multiset {1..L} repeated to the cell size, so realized fold
// sizes differ by at most one (exactly n/L when L divides n). Deterministic
// given the seed. Rejects L < 2 and cells smaller than L.
Dataset assign_folds(const Dataset& dataset, int num_folds, std::uint64_t seed);

// Exact per-(cell, fold) means, one aggregate per pair, ordered by
// (cell_id, fold_id). Summation order is fixed (record order within cell)
// so results do not depend on any parallel schedule.
std::vector<CellFoldAggregate> aggregate(const Dataset& dataset);

// CSV schemas (UTF-8, LF, floats printed with 17 significant digits):
//   aggregates: cell_id,fold_id,count,s_mean_1,...,s_mean_d,y_mean
//   units:      cell_id,fold_id,s_1,...,s_d,y
void write_aggregate_csv(const std::vector<CellFoldAggregate>& aggregates,
                         const std::string& path);
std::vector<CellFoldAggregate> read_aggregate_csv(const std::string& path);
void write_unit_csv(const Dataset& dataset, const std::string& path);
Dataset read_unit_csv(const std::string& path);

// 17-significant-digit round-trippable float formatting used by all writers.
std::string format_double(double x);

}  // namespace bridgeiv
