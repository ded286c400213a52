#include "pinchlab/trace.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <ostream>

namespace pinchlab {

std::string to_string(RunStatus status) {
  switch (status) {
    case RunStatus::Completed:
      return "completed";
    case RunStatus::SingularityReached:
      return "singularity-reached";
  }
  return "unknown";
}

double PinchTrace::sup_cbound() const {
  double c = 0.0;
  for (const auto& r : rows) c = std::max(c, r.Cbound);
  return c;
}

double PinchTrace::max_phi_growth_rate() const {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const double dt = rows[k].t - rows[k - 1].t;
    if (dt <= 0.0) continue;
    worst = std::max(worst, (rows[k].Phi - rows[k - 1].Phi) / dt);
  }
  return worst;
}

double PinchTrace::max_phi_increment() const {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < rows.size(); ++k)
    worst = std::max(worst, rows[k].Phi - rows[k - 1].Phi);
  return worst;
}

void write_csv(std::ostream& out, const PinchTrace& trace) {
  out << kTraceCsvHeader << '\n';
  char buf[64];
  auto put = [&](double v, char sep) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf << sep;
  };
  for (const auto& r : trace.rows) {
    put(r.t, ',');
    put(r.A, ',');
    put(r.B, ',');
    put(r.C, ',');
    put(r.a, ',');
    put(r.b, ',');
    put(r.c, ',');
    put(r.R, ',');
    put(r.Phi, ',');
    put(r.Cbound, ',');
    put(r.dR_residual, ',');
    put(r.P, '\n');
  }
}

nlohmann::json summary_json(const PinchTrace& trace) {
  nlohmann::json j;
  j["status"] = to_string(trace.status);
  j["rho"] = trace.rho;
  j["samples"] = trace.rows.size();
  if (!trace.rows.empty()) {
    const auto& first = trace.rows.front();
    const auto& last = trace.rows.back();
    double max_res = 0.0;
    for (const auto& r : trace.rows) max_res = std::max(max_res, r.dR_residual);
    j["t_final"] = last.t;
    j["phi_initial"] = first.Phi;
    j["phi_final"] = last.Phi;
    j["sup_cbound"] = trace.sup_cbound();
    j["max_dR_residual"] = max_res;
    if (trace.rows.size() > 1) j["max_phi_growth_rate"] = trace.max_phi_growth_rate();
  }
  return j;
}

}  // namespace pinchlab
