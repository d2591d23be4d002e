#include "qchain/serialization.hpp"

#include <cmath>
#include <sstream>

namespace qchain {

namespace {

Json vector_json(const Vector<double> &v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

/// NaN and infinities have no JSON spelling; they become null.
Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

Json to_json(const DiscreteMeasure<double> &m) {
  return {{"nodes", vector_json(m.nodes())}, {"weights", vector_json(m.weights())}};
}

Json to_json(const TransitionKernel<double> &k) {
  Json matrix = Json::array();
  for (Eigen::Index i = 0; i < k.size(); ++i)
    matrix.push_back(vector_json(k.matrix().row(i).transpose()));
  Json params = Json::object();
  for (const auto &[key, value] : k.params()) params[key] = value;
  return {{"family", to_string(k.family())},
          {"params", params},
          {"r", k.r()},
          {"correlation", k.correlation()},
          {"steps", k.steps()},
          {"negativity_defect", k.negativity_defect()},
          {"signed", k.is_signed()},
          {"nodes", vector_json(k.nodes())},
          {"weights", vector_json(k.weights())},
          {"matrix", matrix}};
}

Json to_json(const QuadraticFit<double> &fit) {
  return {{"A", fit.A},
          {"B", fit.B},
          {"C", fit.C},
          {"D", fit.D},
          {"residual", fit.residual},
          {"null_space_dim", fit.null_space_dim}};
}

Json to_json(const LinearFit<double> &fit) {
  return {{"a", fit.a},
          {"b", fit.b},
          {"residual", fit.residual},
          {"null_space_dim", fit.null_space_dim}};
}

Json to_json(const ConstraintReport<double> &rep) {
  return {{"r", rep.r},
          {"r2", rep.r2},
          {"A", rep.A},
          {"B", rep.B},
          {"C", rep.C},
          {"D", rep.D},
          {"C_identity_gap", rep.C_identity_gap},
          {"main_assumption_gap", rep.main_assumption_gap},
          {"degenerate_gap", rep.degenerate_gap},
          {"D_magnitude", rep.D_magnitude},
          {"A_bound_case", to_string(rep.A_bound_case)},
          {"q_value", rep.q_value ? number(*rep.q_value) : Json(nullptr)},
          {"representative", to_string(rep.representative)},
          {"null_space_dim", rep.null_space_dim}};
}

Json to_json(const VarianceClass<double> &vc) {
  return {{"kind", to_string(vc.kind)},
          {"c2", vc.c2},
          {"c1", vc.c1},
          {"c0", vc.c0},
          {"residual", vc.residual}};
}

Json to_json(const IdentityCheck<double> &check) {
  Json out{{"applicable", check.applicable}, {"gap", number(check.gap)}};
  if (!check.reason.empty()) out["reason"] = check.reason;
  Json parts = Json::object();
  for (const auto &[name, value] : check.parts) parts[name] = number(value);
  out["parts"] = parts;
  return out;
}

Json to_json(const MomentBoundReport<double> &rep) {
  Json out{{"applicable", rep.applicable},
           {"fourth_moment", rep.fourth_moment},
           {"fourth_moment_bound", rep.fourth_moment_bound},
           {"cubic_alpha", rep.cubic_alpha},
           {"cubic_beta", rep.cubic_beta},
           {"ratio", rep.ratio ? number(*rep.ratio) : Json(nullptr)},
           {"gap", number(rep.gap)}};
  if (!rep.reason.empty()) out["reason"] = rep.reason;
  return out;
}

std::string kernel_id(const TransitionKernel<double> &k) {
  std::ostringstream id;
  id.precision(12);
  id << to_string(k.family()) << '(';
  bool first = true;
  for (const auto &[key, value] : k.params()) {
    if (key.rfind("beta_", 0) == 0) continue;
    id << (first ? "" : ",") << key << '=' << value;
    first = false;
  }
  id << (first ? "" : ",") << "r=" << k.r();
  if (k.steps() != 1) id << ",steps=" << k.steps();
  id << ')';
  return id.str();
}

}  // namespace qchain
