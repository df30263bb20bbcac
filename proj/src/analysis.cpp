#include "sigcap/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "sigcap/parallel.hpp"

namespace sigcap {

namespace {

constexpr double kSharedDropPValue = 0.85;
constexpr double kLatticeTolerance = 1e-9;

double term_value(std::string_view term, const HeadwayInputs& x) {
  if (term == "intercept") return 1.0;
  if (term == "cv") return x.cv;
  if (term == "av") return x.av;
  if (term == "cav") return x.cav;
  if (term == "d_exl") return x.d_exl;
  if (term == "d_exr") return x.d_exr;
  if (term == "d_shtr") return x.d_shtr;
  if (term == "d_shtr_rt") return x.d_shtr * x.rt;
  throw DomainError("unknown regression term '" + std::string(term) + "'");
}

HeadwayInputs inputs_of(const ResultRow& r) {
  HeadwayInputs x;
  x.cv = r.shares[1];
  x.av = r.shares[2];
  x.cav = r.shares[3];
  x.d_exl = r.d_exl;
  x.d_exr = r.d_exr;
  x.d_shtr = r.d_shtr;
  x.rt = r.rt_pct;
  return x;
}

RegressionResult fit_terms(std::span<const ResultRow> rows, const std::vector<std::string>& terms) {
  std::vector<std::vector<double>> design;
  std::vector<double> y;
  design.reserve(rows.size());
  for (const ResultRow& r : rows) {
    const HeadwayInputs x = inputs_of(r);
    std::vector<double> row;
    for (const std::string& t : terms) row.push_back(term_value(t, x));
    design.push_back(std::move(row));
    y.push_back(*r.h_s);
  }
  return ols(design, y, terms);
}

std::vector<double> lattice(double lo, double hi, double step) {
  std::vector<double> out;
  const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
  for (int i = 0; i <= n; ++i) out.push_back(lo + step * i);
  return out;
}

}  // namespace

std::optional<std::size_t> RegressionResult::index(std::string_view term) const {
  for (std::size_t i = 0; i < terms.size(); ++i)
    if (terms[i] == term) return i;
  return std::nullopt;
}

double RegressionResult::coefficient(std::string_view term) const {
  const auto i = index(term);
  return i ? coefficients[*i] : 0.0;
}

RegressionResult coefficients_only(std::vector<std::string> terms, std::vector<double> values) {
  if (terms.size() != values.size())
    throw DomainError("coefficients_only: terms and values differ in length");
  RegressionResult r;
  r.terms = std::move(terms);
  r.coefficients = std::move(values);
  return r;
}

RegressionResult ols(const std::vector<std::vector<double>>& design, const std::vector<double>& y,
                     std::vector<std::string> terms) {
  const auto n = static_cast<Eigen::Index>(design.size());
  const auto p = static_cast<Eigen::Index>(terms.size());
  if (static_cast<std::size_t>(n) != y.size())
    throw DomainError("ols: design has " + std::to_string(n) + " rows but y has " +
                      std::to_string(y.size()));
  if (p == 0) throw DomainError("ols: no terms");
  if (n <= p)
    throw DomainError("ols: need more observations (" + std::to_string(n) + ") than terms (" +
                      std::to_string(p) + ")");

  Eigen::MatrixXd X(n, p);
  Eigen::VectorXd Y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = design[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != p)
      throw DomainError("ols: row " + std::to_string(i) + " has the wrong number of columns");
    for (Eigen::Index j = 0; j < p; ++j) X(i, j) = row[static_cast<std::size_t>(j)];
    Y(i) = y[static_cast<std::size_t>(i)];
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    std::string names;
    for (const auto& t : terms) names += (names.empty() ? "" : ", ") + t;
    throw SingularDesignError("singular design: rank " + std::to_string(qr.rank()) + " < " +
                              std::to_string(p) + " terms (" + names + ")");
  }
  const Eigen::VectorXd beta = qr.solve(Y);
  const Eigen::VectorXd resid = Y - X * beta;
  const double sse = resid.squaredNorm();
  const double mean_y = Y.mean();
  const double sst = (Y.array() - mean_y).square().sum();
  const auto df = static_cast<double>(n - p);
  const double sigma2 = sse / df;

  // (X'X)^-1 from the pivoted R factor: P R^-1 R^-T P'.
  const Eigen::MatrixXd R =
      qr.matrixR().topLeftCorner(p, p).template triangularView<Eigen::Upper>();
  const Eigen::MatrixXd Rinv =
      R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd cov_pivoted = Rinv * Rinv.transpose();
  const auto& perm = qr.colsPermutation();
  const Eigen::MatrixXd cov = perm * cov_pivoted * perm.transpose();

  RegressionResult r;
  r.terms = std::move(terms);
  r.n_obs = static_cast<std::size_t>(n);
  r.residual_sd = std::sqrt(sigma2);
  r.r2 = sst > 0.0 ? 1.0 - sse / sst : 1.0;
  r.adj_r2 = sst > 0.0 ? 1.0 - (sse / df) / (sst / static_cast<double>(n - 1)) : 1.0;
  boost::math::students_t dist(df);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double b = beta(j);
    const double se = std::sqrt(std::max(0.0, sigma2 * cov(j, j)));
    const double t = se > 0.0 ? b / se : (b == 0.0 ? 0.0 : std::copysign(INFINITY, b));
    const double pval =
        std::isfinite(t) ? 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)))
                         : 0.0;
    r.coefficients.push_back(b);
    r.standard_errors.push_back(se);
    r.t_stats.push_back(t);
    r.p_values.push_back(pval);
    r.ci95_low.push_back(b - kNormalZ95 * se);
    r.ci95_high.push_back(b + kNormalZ95 * se);
  }
  return r;
}

void HeadwayInputs::validate() const {
  for (double s : {cv, av, cav})
    if (!(s >= 0.0 && s <= 1.0)) throw DomainError("headway inputs: shares must lie in [0, 1]");
  if (cv + av + cav > 1.0 + kLatticeTolerance)
    throw DomainError("headway inputs: cv + av + cav exceeds 1");
  for (int d : {d_exl, d_exr, d_shtr})
    if (d != 0 && d != 1) throw DomainError("headway inputs: lane indicators must be 0 or 1");
  if (d_exl + d_exr + d_shtr > 1)
    throw DomainError("headway inputs: at most one lane indicator may be set");
}

const std::vector<std::string> kHeadwayTermsReduced{"intercept", "cv", "av", "cav", "d_exl",
                                                    "d_exr"};
const std::vector<std::string> kHeadwayTermsFull{"intercept", "cv",    "av",     "cav",
                                                 "d_exl",     "d_exr", "d_shtr", "d_shtr_rt"};

std::vector<ResultRow> regression_rows(std::span<const ResultRow> rows, RowFilter filter) {
  std::vector<ResultRow> out;
  for (const ResultRow& r : rows) {
    if (r.group_type == "ALL" || !r.h_s) continue;
    if (r.n_queues < filter.min_queues) continue;
    out.push_back(r);
  }
  return out;
}

HeadwayFit fit_headway_model(std::span<const ResultRow> rows, bool include_shared_terms,
                             RowFilter filter) {
  const std::vector<ResultRow> data = regression_rows(rows, filter);
  HeadwayFit fit;
  fit.model = fit_terms(data, include_shared_terms ? kHeadwayTermsFull : kHeadwayTermsReduced);
  if (include_shared_terms) {
    const std::size_t k = *fit.model.index("d_shtr");
    if (fit.model.p_values[k] > kSharedDropPValue) {
      std::vector<std::string> terms = kHeadwayTermsFull;
      terms.erase(std::find(terms.begin(), terms.end(), "d_shtr"));
      fit.refit = fit_terms(data, terms);
    }
  }
  return fit;
}

double predict_headway(const RegressionResult& coeffs, const HeadwayInputs& inputs) {
  inputs.validate();
  double h = 0.0;
  for (std::size_t i = 0; i < coeffs.terms.size(); ++i)
    h += coeffs.coefficients[i] * term_value(coeffs.terms[i], inputs);
  return h;
}

double capacity(double h, double g, double cycle) {
  if (!(h > 0.0)) throw DomainError("capacity: headway must be > 0");
  if (!(cycle > 0.0) || !(g > 0.0) || g > cycle)
    throw DomainError("capacity: need 0 < g <= C");
  return (3600.0 / h) * (g / cycle);
}

double caf(const RegressionResult& coeffs, const HeadwayInputs& inputs) {
  const double h_adj = predict_headway(coeffs, inputs);
  if (!(h_adj > 0.0)) throw DomainError("caf: predicted headway is not positive");
  return coeffs.coefficient("intercept") / h_adj;
}

std::vector<ShareMix> scenario_grid(double step) {
  if (!(step > 0.0) || step > 1.0) throw DomainError("scenario_grid: step must lie in (0, 1]");
  const double inv = 1.0 / step;
  const long n = std::lround(inv);
  if (std::abs(inv - static_cast<double>(n)) > 1e-6)
    throw DomainError("scenario_grid: step must divide 1 evenly");
  std::vector<ShareMix> out;
  const auto N = static_cast<double>(n);
  for (long c = 0; c <= n; ++c)
    for (long a = 0; a + c <= n; ++a)
      for (long k = 0; k + a + c <= n; ++k) {
        ShareMix m;
        m.cv = static_cast<double>(c) / N;
        m.av = static_cast<double>(a) / N;
        m.cav = static_cast<double>(k) / N;
        m.hv = static_cast<double>(n - c - a - k) / N;
        out.push_back(m);
      }
  return out;
}

ShareGrid grid_export(const RegressionResult& coeffs, double hv_level, GridQuantity quantity,
                      double step, const HeadwayInputs& lane) {
  if (!(hv_level >= 0.0 && hv_level <= 1.0)) throw DomainError("grid_export: hv must lie in [0, 1]");
  const long n = std::lround(1.0 / step);
  if (!(step > 0.0) || std::abs(1.0 / step - static_cast<double>(n)) > 1e-6)
    throw DomainError("grid_export: step must divide 1 evenly");
  ShareGrid g;
  g.hv = hv_level;
  for (long i = 0; i <= n; ++i) {
    g.cav_levels.push_back(static_cast<double>(i) / static_cast<double>(n));
    g.av_levels.push_back(static_cast<double>(i) / static_cast<double>(n));
  }
  for (double av : g.av_levels) {
    std::vector<std::optional<double>> row;
    for (double cav : g.cav_levels) {
      const double cv = 1.0 - hv_level - av - cav;
      if (cv < -kLatticeTolerance) {
        row.emplace_back();
        continue;
      }
      HeadwayInputs x = lane;
      x.cv = std::max(0.0, cv);
      x.av = av;
      x.cav = cav;
      row.emplace_back(quantity == GridQuantity::Headway ? predict_headway(coeffs, x)
                                                         : caf(coeffs, x));
    }
    g.cells.push_back(std::move(row));
  }
  return g;
}

void write_grid_csv(std::ostream& out, const ShareGrid& grid) {
  out << "av\\cav";
  for (double c : grid.cav_levels) out << ',' << format_number(c);
  out << '\n';
  for (std::size_t i = 0; i < grid.av_levels.size(); ++i) {
    out << format_number(grid.av_levels[i]);
    for (const auto& cell : grid.cells[i]) {
      out << ',';
      if (cell) out << format_number(*cell);
    }
    out << '\n';
  }
}

std::vector<double> default_cc0_grid() { return lattice(1.0, 2.0, 0.25); }
std::vector<double> default_cc1_grid() { return lattice(0.9, 1.6, 0.05); }

CalibrationResult calibrate_base(const Scenario& base, const CalibrationOptions& options) {
  if (options.cc0_grid.empty() || options.cc1_grid.empty())
    throw ConfigError("calibration: cc0 and cc1 grids must be nonempty");
  if (options.replications < 1) throw ConfigError("calibration: replications must be >= 1");
  if (base.shares[index_of(Fleet::HV)] != 1.0)
    throw ConfigError("calibration: the base scenario must be 100% HV");

  struct Job {
    std::size_t point;
    int rep;
  };
  CalibrationResult result;
  for (double c1 : options.cc1_grid)
    for (double c0 : options.cc0_grid) result.points.push_back({c0, c1, std::nullopt, 0});
  std::vector<Job> jobs;
  for (std::size_t p = 0; p < result.points.size(); ++p)
    for (int r = 0; r < options.replications; ++r) jobs.push_back({p, r});

  // Per job: sum of headways and count over exclusive-through valid records.
  std::vector<std::pair<double, int>> partial(jobs.size(), {0.0, 0});
  parallel_for(jobs.size(), options.parallelism, [&](std::size_t j) {
    const CalibrationPoint& pt = result.points[jobs[j].point];
    Scenario s = base;
    s.profiles[index_of(Fleet::HV)].cc0 = pt.cc0;
    s.profiles[index_of(Fleet::HV)].cc1 = pt.cc1;
    s.seed = options.seed_base + static_cast<std::uint64_t>(jobs[j].rep);
    const RunLog log = run(s);
    double sum = 0.0;
    int count = 0;
    for (const QueueDischargeRecord& r : extract_discharges(log)) {
      if (!r.valid) continue;
      if (log.groups[static_cast<std::size_t>(r.lane_group)].type != LaneGroupType::ExclusiveThrough)
        continue;
      sum += discharge_headway(r);
      ++count;
    }
    partial[j] = {sum, count};
  });

  for (std::size_t p = 0; p < result.points.size(); ++p) {
    double sum = 0.0;
    int count = 0;
    for (std::size_t j = 0; j < jobs.size(); ++j)
      if (jobs[j].point == p) {
        sum += partial[j].first;
        count += partial[j].second;
      }
    CalibrationPoint& pt = result.points[p];
    pt.n_queues = count;
    if (count > 0) pt.mean_h = sum / count;
  }

  const CalibrationPoint* best = nullptr;
  for (const CalibrationPoint& pt : result.points) {
    if (!pt.mean_h) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "no valid exclusive-through queue at cc0=%.6g cc1=%.6g",
                    pt.cc0, pt.cc1);
      result.warnings.emplace_back(buf);
      continue;
    }
    if (best == nullptr) {
      best = &pt;
      continue;
    }
    const double e = std::abs(*pt.mean_h - options.target_h);
    const double eb = std::abs(*best->mean_h - options.target_h);
    if (e < eb || (e == eb && (pt.cc1 < best->cc1 || (pt.cc1 == best->cc1 && pt.cc0 < best->cc0))))
      best = &pt;
  }
  if (best == nullptr) throw ConfigError("calibration: no grid point produced a valid queue");
  result.cc0 = best->cc0;
  result.cc1 = best->cc1;
  result.achieved_h = *best->mean_h;
  return result;
}

}  // namespace sigcap
