#include "core/evaluator.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <set>

namespace gems {

std::string_view to_string(OpKind k) {
  switch (k) {
    case OpKind::Match: return "match";
    case OpKind::Substitute: return "substitute";
    case OpKind::Insert: return "insert";
    case OpKind::Delete: return "delete";
  }
  return "";
}

double substitution_cost(const EmsInstruction& a, const EmsInstruction& b, const CostConfig& cfg) {
  double c = 0.0;
  if (a.handedness != b.handedness) c += cfg.handedness;
  if (a.joint != b.joint) c += cfg.joint;
  if (a.movement != b.movement) c += cfg.dof;
  return c;
}

bool biomech_violation(const EmsInstruction& instr, const JointLimitTable& limits) {
  const auto range = limits.range(instr.joint, axis_of(instr.movement));
  return range && instr.target_angle > range->span();
}

Alignment distance(std::span<const EmsInstruction> generated, const FormatReport& report,
                   std::span<const EmsInstruction> ground_truth, const JointLimitTable& limits,
                   const CostConfig& cfg) {
  const std::size_t n = generated.size();
  const std::size_t m = ground_truth.size();
  const double extra_cost = cfg.swap_insert_delete ? cfg.deletion : cfg.insertion;
  const double missing_cost = cfg.swap_insert_delete ? cfg.insertion : cfg.deletion;
  const OpKind extra_kind = cfg.swap_insert_delete ? OpKind::Delete : OpKind::Insert;
  const OpKind missing_kind = cfg.swap_insert_delete ? OpKind::Insert : OpKind::Delete;

  // d[i][j]: cheapest alignment of the first i generated and j ground-truth
  // instructions.
  std::vector<std::vector<double>> d(n + 1, std::vector<double>(m + 1, 0.0));
  for (std::size_t i = 1; i <= n; ++i) d[i][0] = d[i - 1][0] + extra_cost;
  for (std::size_t j = 1; j <= m; ++j) d[0][j] = d[0][j - 1] + missing_cost;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const double diag = d[i - 1][j - 1] + substitution_cost(generated[i - 1], ground_truth[j - 1], cfg);
      d[i][j] = std::min({diag, d[i][j - 1] + missing_cost, d[i - 1][j] + extra_cost});
    }
  }

  Alignment out;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    AlignOp op;
    if (i > 0 && j > 0) {
      const auto& g = generated[i - 1];
      const auto& t = ground_truth[j - 1];
      const double sub = substitution_cost(g, t, cfg);
      if (d[i][j] == d[i - 1][j - 1] + sub) {
        op.generated = i - 1;
        op.ground_truth = j - 1;
        op.cost = sub;
        op.handedness_mismatch = g.handedness != t.handedness;
        op.joint_mismatch = g.joint != t.joint;
        op.dof_mismatch = g.movement != t.movement;
        op.kind = (op.handedness_mismatch || op.joint_mismatch || op.dof_mismatch) ? OpKind::Substitute
                                                                                    : OpKind::Match;
        out.ops.push_back(op);
        --i;
        --j;
        continue;
      }
    }
    if (j > 0 && d[i][j] == d[i][j - 1] + missing_cost) {
      op.kind = missing_kind;
      op.ground_truth = j - 1;
      op.cost = missing_cost;
      --j;
    } else {
      op.kind = extra_kind;
      op.generated = i - 1;
      op.cost = extra_cost;
      --i;
    }
    out.ops.push_back(op);
  }
  std::reverse(out.ops.begin(), out.ops.end());

  out.op_cost = d[n][m];
  for (const auto& op : out.ops)
    if (op.kind != OpKind::Match) ++out.unweighted;
  for (const auto& g : generated)
    if (biomech_violation(g, limits)) ++out.biomech_violations;
  out.format_violations = static_cast<int>(report.size());
  out.violation_cost = out.biomech_violations * cfg.biomech_violation + out.format_violations * cfg.format_violation;
  out.weighted = out.op_cost + out.violation_cost;
  return out;
}

nlohmann::json to_json(const Alignment& a, std::span<const EmsInstruction> generated,
                       std::span<const EmsInstruction> ground_truth) {
  nlohmann::json ops = nlohmann::json::array();
  for (const auto& op : a.ops) {
    nlohmann::json o{{"op", to_string(op.kind)}, {"cost", op.cost}};
    if (op.generated) o["generated"] = serialize_instruction(generated[*op.generated]);
    if (op.ground_truth) o["ground_truth"] = serialize_instruction(ground_truth[*op.ground_truth]);
    if (op.kind == OpKind::Substitute) {
      nlohmann::json mism = nlohmann::json::array();
      if (op.handedness_mismatch) mism.push_back("handedness");
      if (op.joint_mismatch) mism.push_back("joint");
      if (op.dof_mismatch) mism.push_back("dof");
      o["mismatched"] = mism;
    }
    ops.push_back(std::move(o));
  }
  return {{"schema_version", 1},
          {"ops", ops},
          {"op_cost", a.op_cost},
          {"biomech_violations", a.biomech_violations},
          {"format_violations", a.format_violations},
          {"violation_cost", a.violation_cost},
          {"weighted", a.weighted},
          {"unweighted", a.unweighted}};
}

std::string alignment_table(const Alignment& a, std::span<const EmsInstruction> generated,
                            std::span<const EmsInstruction> ground_truth) {
  std::size_t w = 9;
  for (const auto& g : generated) w = std::max(w, serialize_instruction(g).size());
  auto pad = [](std::string s, std::size_t width) {
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
  };
  std::string out = pad("generated", w) + "  " + pad("op", 10) + "  " + pad("cost", 5) + "  ground truth\n";
  for (const auto& op : a.ops) {
    const std::string g = op.generated ? serialize_instruction(generated[*op.generated]) : "-";
    const std::string t = op.ground_truth ? serialize_instruction(ground_truth[*op.ground_truth]) : "-";
    out += pad(g, w) + "  " + pad(std::string(to_string(op.kind)), 10) + "  " + pad(format_number(op.cost), 5) +
           "  " + t + "\n";
  }
  out += "operations " + format_number(a.op_cost) + ", biomechanical violations " +
         std::to_string(a.biomech_violations) + ", format violations " + std::to_string(a.format_violations) + "\n";
  out += "weighted " + format_number(a.weighted) + ", unweighted " + std::to_string(a.unweighted) + "\n";
  return out;
}

AblationReport ablation_report(const AblationResults& results) {
  if (results.empty()) throw Error(ErrorKind::InvalidArgument, "ablation report needs at least one condition");
  std::set<std::string> all_tasks;
  for (const auto& [cond, tasks] : results) {
    if (tasks.empty()) throw Error(ErrorKind::InvalidArgument, "condition '" + cond + "' has no tasks");
    for (const auto& [task, _] : tasks) all_tasks.insert(task);
  }
  std::string missing;
  for (const auto& [cond, tasks] : results) {
    for (const auto& t : all_tasks) {
      if (!tasks.contains(t)) missing += (missing.empty() ? "" : ", ") + cond + ":" + t;
    }
  }
  if (!missing.empty()) throw Error(ErrorKind::InvalidArgument, "conditions cover different tasks; missing " + missing);

  AblationReport r;
  r.tasks.assign(all_tasks.begin(), all_tasks.end());
  std::vector<std::string> order;
  for (const char* c : kConditionOrder)
    if (results.contains(c)) order.emplace_back(c);
  for (const auto& [cond, _] : results)
    if (std::find(order.begin(), order.end(), cond) == order.end()) order.push_back(cond);

  for (const auto& cond : order) {
    AblationRow row;
    row.condition = cond;
    double sw = 0.0, su = 0.0;
    for (const auto& [task, a] : results.at(cond)) {
      row.weighted[task] = a.weighted;
      row.unweighted[task] = a.unweighted;
      sw += a.weighted;
      su += a.unweighted;
    }
    row.mean_weighted = sw / static_cast<double>(r.tasks.size());
    row.mean_unweighted = su / static_cast<double>(r.tasks.size());
    r.rows.push_back(std::move(row));
  }
  return r;
}

nlohmann::json to_json(const AblationReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json per_task = nlohmann::json::object();
    for (const auto& t : r.tasks)
      per_task[t] = {{"weighted", row.weighted.at(t)}, {"unweighted", row.unweighted.at(t)}};
    rows.push_back({{"condition", row.condition},
                    {"tasks", per_task},
                    {"mean_weighted", row.mean_weighted},
                    {"mean_unweighted", row.mean_unweighted}});
  }
  return {{"schema_version", 1}, {"tasks", r.tasks}, {"conditions", rows}};
}

std::string to_text(const AblationReport& r) {
  auto cell = [](const std::string& s, std::size_t w) {
    std::string out = s;
    if (out.size() < w) out.insert(0, w - out.size(), ' ');
    return out;
  };
  auto mean = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  std::size_t cw = 12;
  for (const auto& t : r.tasks) cw = std::max(cw, t.size() + 2);
  std::string out = std::string(12, ' ');
  for (const auto& t : r.tasks) out += cell(t, cw);
  out += cell("mean", cw) + "\n";
  for (const auto& row : r.rows) {
    std::string name = row.condition;
    name.resize(12, ' ');
    out += name;
    for (const auto& t : r.tasks)
      out += cell(format_number(row.weighted.at(t)) + " (" + std::to_string(row.unweighted.at(t)) + ")", cw);
    out += cell(mean(row.mean_weighted) + " (" + mean(row.mean_unweighted) + ")", cw + 6) + "\n";
  }
  out += "cells: weighted (unweighted)\n";
  return out;
}

}  // namespace gems
