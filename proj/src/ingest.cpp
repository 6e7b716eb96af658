#include "ebnf/ingest.hpp"

#include <cmath>
#include <map>
#include <unordered_map>

namespace ebnf {

std::pair<double, double> arcsine_transform(const CountRecord& rec) {
  if (rec.trials <= 0)
    throw ValidationError("trials must be > 0 for unit '" + rec.unit_id + "'", errc::bad_value);
  if (rec.successes < 0 || rec.successes > rec.trials)
    throw ValidationError("successes out of range for unit '" + rec.unit_id + "'", errc::bad_value);
  double ratio = (static_cast<double>(rec.successes) + 0.25) /
                 (static_cast<double>(rec.trials) + 0.5);
  return {std::asin(std::sqrt(ratio)), 4.0 * static_cast<double>(rec.trials)};
}

Observation aggregate_unit(const std::string& unit_id,
                           const std::vector<ReplicateRecord>& recs) {
  if (recs.size() < 2)
    throw ValidationError("unit '" + unit_id + "' has fewer than 2 replicates", errc::degenerate);
  double wsum = 0.0, wx = 0.0;
  for (const auto& r : recs) {
    if (!(r.weight > 0) || !std::isfinite(r.weight))
      throw ValidationError("non-positive weight for unit '" + unit_id + "'", errc::bad_value);
    wsum += r.weight;
    wx += r.weight * r.value;
  }
  double xbar = wx / wsum;
  double wss = 0.0;
  for (const auto& r : recs) wss += r.weight * (r.value - xbar) * (r.value - xbar);
  double n = static_cast<double>(recs.size());
  double s2 = wss / ((n - 1.0) * wsum);
  if (s2 <= 0)
    throw ValidationError("unit '" + unit_id + "' has zero variance", errc::degenerate);
  return {unit_id, xbar, s2, n - 1.0};
}

IngestReport ingest_replicates(const std::vector<ReplicateRecord>& rows, double min_k) {
  // group by unit, preserving first-appearance order
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<ReplicateRecord>> groups;
  for (const auto& r : rows) {
    auto [it, inserted] = groups.try_emplace(r.unit_id);
    if (inserted) order.push_back(r.unit_id);
    it->second.push_back(r);
  }
  IngestReport rep;
  std::vector<RawRow> raw;
  for (const auto& id : order) {
    const auto& recs = groups[id];
    if (recs.size() < 2) {
      rep.dropped_units.push_back(id);
      continue;
    }
    if (min_k > 0 && static_cast<double>(recs.size()) - 1.0 <= min_k) {
      rep.dropped_units.push_back(id);
      continue;
    }
    try {
      Observation o = aggregate_unit(id, recs);
      raw.emplace_back(o.id, o.x, o.s2, o.k);
    } catch (const ValidationError& e) {
      if (e.code() == errc::degenerate) rep.degenerate_units.push_back(id);
      else throw;
    }
  }
  if (raw.empty())
    throw ValidationError("no units remain after filtering", errc::degenerate);
  rep.dataset = validate_dataset(raw);
  return rep;
}

IngestReport ingest_counts(const std::vector<CountRecord>& rows, double min_k) {
  std::vector<ReplicateRecord> reps;
  reps.reserve(rows.size());
  for (const auto& r : rows) {
    auto [value, weight] = arcsine_transform(r);
    reps.push_back({r.unit_id, value, weight});
  }
  return ingest_replicates(reps, min_k);
}

std::vector<CountRecord> training_split(const std::vector<CountRecord>& rows) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& r : rows) ++counts[r.unit_id];
  std::unordered_map<std::string, std::size_t> kept;
  std::vector<CountRecord> out;
  for (const auto& r : rows) {
    std::size_t limit = counts[r.unit_id] / 2;
    if (kept[r.unit_id] < limit) {
      out.push_back(r);
      ++kept[r.unit_id];
    }
  }
  return out;
}

IngestReport ingest_csv(const std::string& path, double min_k) {
  auto rows = read_csv(path);
  if (rows.empty()) throw ValidationError("empty ingest file " + path, errc::parse);
  const auto& header = rows[0];
  auto num = [&](const std::string& s, std::size_t line) {
    try {
      return std::stod(s);
    } catch (const std::exception&) {
      throw ValidationError("cannot parse number '" + s + "' at line " + std::to_string(line),
                            errc::parse);
    }
  };
  if (header == std::vector<std::string>{"unit_id", "successes", "trials"}) {
    std::vector<CountRecord> recs;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].size() != 3)
        throw ValidationError("bad field count at line " + std::to_string(i + 1), errc::parse);
      recs.push_back({rows[i][0], static_cast<long long>(num(rows[i][1], i + 1)),
                      static_cast<long long>(num(rows[i][2], i + 1))});
    }
    return ingest_counts(recs, min_k);
  }
  if (header == std::vector<std::string>{"unit_id", "value", "weight"}) {
    std::vector<ReplicateRecord> recs;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].size() != 3)
        throw ValidationError("bad field count at line " + std::to_string(i + 1), errc::parse);
      recs.push_back({rows[i][0], num(rows[i][1], i + 1), num(rows[i][2], i + 1)});
    }
    return ingest_replicates(recs, min_k);
  }
  throw ValidationError("expected header unit_id,successes,trials or unit_id,value,weight in " +
                            path,
                        errc::parse);
}

}  // namespace ebnf
