#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sigcap/engine.hpp"
#include "sigcap/measurement.hpp"

namespace sigcap {

class SingularDesignError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kNormalZ95 = 1.96;

struct RegressionResult {
  std::vector<std::string> terms;
  std::vector<double> coefficients;
  std::vector<double> standard_errors;
  std::vector<double> t_stats;
  std::vector<double> p_values;  // two-sided, Student t with n - p degrees of freedom
  std::vector<double> ci95_low;  // coefficient -/+ 1.96 standard errors
  std::vector<double> ci95_high;
  double r2 = 0.0;
  double adj_r2 = 0.0;
  double residual_sd = 0.0;
  std::size_t n_obs = 0;

  std::optional<std::size_t> index(std::string_view term) const;
  /// Coefficient for `term`, or 0 when the model does not carry it.
  double coefficient(std::string_view term) const;
};

/// A result holding only point estimates (no inference), e.g. reference coefficients.
RegressionResult coefficients_only(std::vector<std::string> terms, std::vector<double> values);

/// Ordinary least squares of y on the columns of `design` (row-major, one row per
/// observation). Throws SingularDesignError when the columns are linearly dependent and
/// DomainError when there are not more observations than terms.
RegressionResult ols(const std::vector<std::vector<double>>& design, const std::vector<double>& y,
                     std::vector<std::string> terms);

struct HeadwayInputs {
  double cv = 0.0;
  double av = 0.0;
  double cav = 0.0;
  int d_exl = 0;
  int d_exr = 0;
  int d_shtr = 0;
  double rt = 0.0;  // right-turn percent on shared lanes

  /// Throws DomainError unless shares lie in [0,1], sum to at most 1, and at most one
  /// lane indicator is set.
  void validate() const;
};

/// Term names, in design-column order.
extern const std::vector<std::string> kHeadwayTermsReduced;  // intercept cv av cav d_exl d_exr
extern const std::vector<std::string> kHeadwayTermsFull;     // ... d_shtr d_shtr_rt

struct HeadwayFit {
  RegressionResult model;                 // as requested
  std::optional<RegressionResult> refit;  // without d_shtr when its p-value exceeds 0.85
};

struct RowFilter {
  int min_queues = 1;  // rows with fewer valid queues are left out
};

/// Regression rows: lane-group rows (not the intersection row) that carry a headway.
std::vector<ResultRow> regression_rows(std::span<const ResultRow> rows, RowFilter filter = {});

HeadwayFit fit_headway_model(std::span<const ResultRow> rows, bool include_shared_terms,
                             RowFilter filter = {});

double predict_headway(const RegressionResult& coeffs, const HeadwayInputs& inputs);

/// (3600 / h) * (g / C), veh/h/lane.
double capacity(double h, double g, double cycle);

/// Intercept over predicted headway. Throws DomainError for a nonpositive prediction.
double caf(const RegressionResult& coeffs, const HeadwayInputs& inputs);

struct ShareMix {
  double hv = 1.0;
  double cv = 0.0;
  double av = 0.0;
  double cav = 0.0;
};

/// Every (cv, av, cav) on the lattice of `step` with cv + av + cav <= 1; hv is the rest.
/// Ordered by cv, then av, then cav. Throws DomainError unless 1/step is an integer.
std::vector<ShareMix> scenario_grid(double step = 0.2);

enum class GridQuantity : std::uint8_t { Headway, Caf };

struct ShareGrid {
  double hv = 0.0;
  std::vector<double> cav_levels;                      // columns
  std::vector<double> av_levels;                       // rows
  std::vector<std::vector<std::optional<double>>> cells;  // [av][cav]; empty where cv < 0
};

ShareGrid grid_export(const RegressionResult& coeffs, double hv_level, GridQuantity quantity,
                      double step = 0.2, const HeadwayInputs& lane = {});
void write_grid_csv(std::ostream& out, const ShareGrid& grid);

struct CalibrationPoint {
  double cc0 = 0.0;
  double cc1 = 0.0;
  std::optional<double> mean_h;
  int n_queues = 0;
};

struct CalibrationResult {
  double cc0 = 0.0;
  double cc1 = 0.0;
  double achieved_h = 0.0;
  std::vector<CalibrationPoint> points;
  std::vector<std::string> warnings;
};

struct CalibrationOptions {
  double target_h = 2.0;
  std::vector<double> cc0_grid;
  std::vector<double> cc1_grid;
  int replications = 3;
  std::uint64_t seed_base = 1;
  int parallelism = 1;
};

/// Default search grids: cc0 1.0..2.0 by 0.25 m, cc1 0.9..1.6 by 0.05 s.
std::vector<double> default_cc0_grid();
std::vector<double> default_cc1_grid();

/// Runs `base` (which must be all HV) at every (cc0, cc1) pair with the HV profile
/// overridden, pools exclusive-through discharges over the replications, and returns the
/// pair whose mean headway is closest to the target (ties: smaller cc1, then smaller cc0).
CalibrationResult calibrate_base(const Scenario& base, const CalibrationOptions& options);

}  // namespace sigcap
