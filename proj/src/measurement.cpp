#include "sigcap/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace sigcap {

namespace {

std::optional<double> mean_of(double sum, std::size_t n) {
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

bool in_window(const RunLog& log, double t) {
  return t >= log.measure_start && t < log.measure_end;
}

}  // namespace

std::vector<QueueDischargeRecord> extract_discharges(const RunLog& log) {
  std::vector<QueueDischargeRecord> out;
  for (const GreenOnsetQueue& onset : log.green_onsets) {
    if (!in_window(log, onset.t)) continue;
    const LaneGroupInfo& group = log.groups.at(static_cast<std::size_t>(onset.group));
    const double served_until = onset.t + group.green + group.amber;
    QueueDischargeRecord r;
    r.lane_group = onset.group;
    r.lane = onset.lane;
    r.green_onset = onset.t;
    r.cycle_index = group.cycle > 0.0 ? static_cast<int>(std::floor(onset.t / group.cycle)) : 0;
    r.period_index = static_cast<int>(std::floor((onset.t - log.measure_start) / kPeriodLength));
    r.stopped_at_green = static_cast<int>(onset.vehicle_ids.size());
    for (std::uint64_t id : onset.vehicle_ids) {
      const VehicleRecord& v = log.vehicles.at(id - 1);
      if (!v.crossing_time || *v.crossing_time >= served_until) break;
      r.crossing_times.push_back(*v.crossing_time);
    }
    r.queue_size_at_green = static_cast<int>(r.crossing_times.size());
    if (r.queue_size_at_green == 0) continue;
    r.valid = r.queue_size_at_green >= kMinValidQueue;
    out.push_back(std::move(r));
  }
  return out;
}

double discharge_headway(const QueueDischargeRecord& record) {
  if (!record.valid) throw DomainError("discharge_headway: record is not valid");
  const int last = std::min(record.queue_size_at_green, kLastTimedVehicle);
  if (static_cast<int>(record.crossing_times.size()) < last)
    throw DomainError("discharge_headway: record is missing crossing times");
  const double t4 = record.crossing_times[kFirstTimedVehicle - 1];
  const double tl = record.crossing_times[static_cast<std::size_t>(last - 1)];
  return (tl - t4) / static_cast<double>(last - kFirstTimedVehicle);
}

HeadwayEstimate saturation_headway(std::span<const QueueDischargeRecord> records,
                                   std::optional<int> period) {
  HeadwayEstimate est;
  int total_valid = 0;
  double sum = 0.0;
  for (const QueueDischargeRecord& r : records) {
    if (!r.valid) continue;
    ++total_valid;
    if (period && r.period_index != *period) continue;
    sum += discharge_headway(r);
    ++est.n_queues;
  }
  est.h_s = mean_of(sum, static_cast<std::size_t>(est.n_queues));
  est.low_sample = total_valid < kMinValidQueues;
  return est;
}

std::optional<double> control_delay(const VehicleRecord& vehicle) {
  if (!vehicle.exit_time) return std::nullopt;
  return (*vehicle.exit_time - vehicle.entry_time) - vehicle.free_flow_time;
}

std::optional<double> travel_time(const VehicleRecord& vehicle) {
  if (!vehicle.exit_time) return std::nullopt;
  return *vehicle.exit_time - vehicle.entry_time;
}

QueueThroughput queue_length_and_throughput(const RunLog& log) {
  QueueThroughput out;
  const std::size_t ng = log.groups.size();
  out.mean_queue.assign(ng, 0.0);
  out.throughput.assign(ng, 0);
  for (std::size_t g = 0; g < ng && g < log.queue_samples.size(); ++g) {
    const auto& samples = log.queue_samples[g];
    if (samples.empty()) continue;
    double sum = 0.0;
    for (std::uint16_t q : samples) sum += q;
    out.mean_queue[g] = sum / static_cast<double>(samples.size());
  }
  for (const VehicleRecord& v : log.vehicles) {
    if (!v.crossing_time || !in_window(log, *v.crossing_time)) continue;
    ++out.throughput[static_cast<std::size_t>(v.group)];
  }
  for (std::size_t g = 0; g < ng; ++g) {
    out.mean_queue_all += out.mean_queue[g];
    out.throughput_all += out.throughput[g];
  }
  if (ng > 0) out.mean_queue_all /= static_cast<double>(ng);
  return out;
}

MobilitySummary summarize(const RunLog& log) {
  const std::size_t ng = log.groups.size();
  const double hours = (log.measure_end - log.measure_start) / 3600.0;
  const std::vector<QueueDischargeRecord> records = extract_discharges(log);
  const QueueThroughput qt = queue_length_and_throughput(log);

  std::vector<double> delay_sum(ng, 0.0), tt_sum(ng, 0.0);
  std::vector<std::size_t> done(ng, 0), arrivals(ng, 0);
  for (const VehicleRecord& v : log.vehicles) {
    if (v.id == 0 || !in_window(log, v.entry_time)) continue;
    const auto g = static_cast<std::size_t>(v.group);
    ++arrivals[g];
    if (auto d = control_delay(v)) {
      delay_sum[g] += *d;
      tt_sum[g] += *travel_time(v);
      ++done[g];
    }
  }

  MobilitySummary out;
  GroupSummary& all = out.intersection;
  all.lane_group = "ALL";
  double all_delay = 0.0, all_tt = 0.0, weighted_h = 0.0, weight = 0.0;
  std::size_t all_done = 0;
  int all_queues = 0;
  std::array<double, 4> period_weighted{}, period_weight{};
  std::array<int, 4> period_queues{};

  for (std::size_t g = 0; g < ng; ++g) {
    std::vector<QueueDischargeRecord> mine;
    for (const QueueDischargeRecord& r : records)
      if (r.lane_group == static_cast<int>(g)) mine.push_back(r);
    GroupSummary s;
    s.lane_group = log.groups[g].id;
    s.type = log.groups[g].type;
    s.right_turn_pct = log.groups[g].right_turn_pct;
    s.headway = saturation_headway(mine);
    for (int p = 0; p < 4; ++p) s.periods[static_cast<std::size_t>(p)] = saturation_headway(mine, p);
    s.delay = mean_of(delay_sum[g], done[g]);
    s.travel_time = mean_of(tt_sum[g], done[g]);
    s.queue_length = qt.mean_queue[g];
    s.throughput = static_cast<double>(qt.throughput[g]) / hours;
    s.arrivals = arrivals[g];

    all_delay += delay_sum[g];
    all_tt += tt_sum[g];
    all_done += done[g];
    all.arrivals += arrivals[g];
    all_queues += s.headway.n_queues;
    if (s.headway.h_s) {
      weighted_h += *s.headway.h_s * s.throughput;
      weight += s.throughput;
    }
    for (std::size_t p = 0; p < 4; ++p) {
      period_queues[p] += s.periods[p].n_queues;
      if (s.periods[p].h_s) {
        period_weighted[p] += *s.periods[p].h_s * s.throughput;
        period_weight[p] += s.throughput;
      }
    }
    out.groups.push_back(std::move(s));
  }
  all.headway.n_queues = all_queues;
  all.headway.low_sample = all_queues < kMinValidQueues;
  if (weight > 0.0) all.headway.h_s = weighted_h / weight;
  for (std::size_t p = 0; p < 4; ++p) {
    all.periods[p].n_queues = period_queues[p];
    all.periods[p].low_sample = all.headway.low_sample;
    if (period_weight[p] > 0.0) all.periods[p].h_s = period_weighted[p] / period_weight[p];
  }
  all.delay = mean_of(all_delay, all_done);
  all.travel_time = mean_of(all_tt, all_done);
  all.queue_length = qt.mean_queue_all;
  all.throughput = static_cast<double>(qt.throughput_all) / hours;
  return out;
}

std::vector<ResultRow> result_rows(const RunLog& log, const MobilitySummary& summary) {
  std::vector<ResultRow> rows;
  auto make = [&](const GroupSummary& s, std::string type) {
    ResultRow r;
    r.scenario_id = log.scenario_id;
    r.seed = log.seed;
    r.shares = log.shares;
    r.lane_group = s.lane_group;
    r.group_type = std::move(type);
    r.d_exl = r.group_type == "EXL";
    r.d_exr = r.group_type == "EXR";
    r.d_shtr = r.group_type == "SHTR";
    r.rt_pct = s.right_turn_pct;
    r.h_s = s.headway.h_s;
    r.n_queues = s.headway.n_queues;
    r.low_sample = s.headway.low_sample;
    r.delay = s.delay;
    r.travel_time = s.travel_time;
    r.queue_length = s.queue_length;
    r.throughput = s.throughput;
    r.arrivals = s.arrivals;
    return r;
  };
  for (const GroupSummary& s : summary.groups) rows.push_back(make(s, std::string(to_string(s.type))));
  rows.push_back(make(summary.intersection, "ALL"));
  return rows;
}

const std::vector<std::string> kResultColumns{
    "scenario_id", "seed",     "hv",          "cv",           "av",       "cav",
    "lane_group",  "group_type", "d_exl",     "d_exr",        "d_shtr",   "rt_pct",
    "h_s",         "n_queues", "low_sample",  "delay",        "travel_time",
    "queue_length", "throughput", "arrivals"};

std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

namespace {

std::string opt(const std::optional<double>& x) { return x ? format_number(*x) : std::string(); }

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& column, std::size_t line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line) + ": column " + column +
                      ": not a number: '" + s + "'");
  }
}

}  // namespace

void write_results_csv(std::ostream& out, std::span<const ResultRow> rows) {
  for (std::size_t i = 0; i < kResultColumns.size(); ++i)
    out << (i ? "," : "") << kResultColumns[i];
  out << '\n';
  for (const ResultRow& r : rows) {
    out << r.scenario_id << ',' << r.seed;
    for (double s : r.shares) out << ',' << format_number(s);
    out << ',' << r.lane_group << ',' << r.group_type << ',' << r.d_exl << ',' << r.d_exr << ','
        << r.d_shtr << ',' << format_number(r.rt_pct) << ',' << opt(r.h_s) << ',' << r.n_queues
        << ',' << (r.low_sample ? 1 : 0) << ',' << opt(r.delay) << ',' << opt(r.travel_time)
        << ',' << format_number(r.queue_length) << ',' << format_number(r.throughput) << ','
        << r.arrivals << '\n';
  }
}

std::vector<ResultRow> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("results: empty input, expected a header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_csv(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  std::string missing;
  for (const std::string& c : kResultColumns)
    if (!col.count(c)) missing += (missing.empty() ? "" : ", ") + c;
  if (!missing.empty()) throw ConfigError("results: missing required columns: " + missing);

  std::vector<ResultRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv(line);
    if (cells.size() < header.size())
      throw ConfigError("line " + std::to_string(lineno) + ": expected " +
                        std::to_string(header.size()) + " cells, found " +
                        std::to_string(cells.size()));
    auto cell = [&](const char* name) -> const std::string& { return cells[col.at(name)]; };
    auto num = [&](const char* name) { return parse_double(cell(name), name, lineno); };
    auto optnum = [&](const char* name) -> std::optional<double> {
      if (cell(name).empty()) return std::nullopt;
      return num(name);
    };
    ResultRow r;
    r.scenario_id = static_cast<int>(num("scenario_id"));
    r.seed = static_cast<std::uint64_t>(num("seed"));
    r.shares = {num("hv"), num("cv"), num("av"), num("cav")};
    r.lane_group = cell("lane_group");
    r.group_type = cell("group_type");
    r.d_exl = static_cast<int>(num("d_exl"));
    r.d_exr = static_cast<int>(num("d_exr"));
    r.d_shtr = static_cast<int>(num("d_shtr"));
    r.rt_pct = num("rt_pct");
    r.h_s = optnum("h_s");
    r.n_queues = static_cast<int>(num("n_queues"));
    r.low_sample = num("low_sample") != 0.0;
    r.delay = optnum("delay");
    r.travel_time = optnum("travel_time");
    r.queue_length = num("queue_length");
    r.throughput = num("throughput");
    r.arrivals = static_cast<std::size_t>(num("arrivals"));
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_period_csv(std::ostream& out, const RunLog& log, const MobilitySummary& summary) {
  out << "scenario_id,seed,lane_group,period,h_s,n_queues\n";
  auto emit = [&](const GroupSummary& s) {
    for (std::size_t p = 0; p < s.periods.size(); ++p)
      out << log.scenario_id << ',' << log.seed << ',' << s.lane_group << ',' << p << ','
          << opt(s.periods[p].h_s) << ',' << s.periods[p].n_queues << '\n';
  };
  for (const GroupSummary& s : summary.groups) emit(s);
  emit(summary.intersection);
}

}  // namespace sigcap
