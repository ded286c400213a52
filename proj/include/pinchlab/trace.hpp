#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace pinchlab {

/// One sample of a pinching run. For warped runs the metric/h columns hold the
/// coordinate components at the grid point where Phi is largest
/// (A = f^2, B = C = psi^2, a = alpha, b = c = beta).
struct PinchSample {
  double t = 0.0;
  double A = 0.0, B = 0.0, C = 0.0;
  double a = 0.0, b = 0.0, c = 0.0;
  double R = 0.0;
  double Phi = 0.0;     // |h|^2 / (R + rho)^2
  double Cbound = 0.0;  // |Rc| / (R + rho)
  double dR_residual = 0.0;
  double P = 0.0;
};

enum class RunStatus {
  Completed,           // horizon reached
  SingularityReached,  // blow-up threshold, step underflow, or neckpinch
};

std::string to_string(RunStatus status);

struct PinchTrace {
  std::vector<PinchSample> rows;
  double rho = 0.0;
  RunStatus status = RunStatus::Completed;

  bool empty() const { return rows.empty(); }
  double final_time() const { return rows.empty() ? 0.0 : rows.back().t; }
  /// sup over the trace of |Rc| / (R + rho).
  double sup_cbound() const;
  /// Largest increase of Phi per unit time between consecutive samples.
  double max_phi_growth_rate() const;
  /// Largest Phi(t_{k+1}) - Phi(t_k) between consecutive samples.
  double max_phi_increment() const;
};

/// Column order: t,A,B,C,a,b,c,R,Phi,Cbound,dR_residual,P.
inline constexpr const char* kTraceCsvHeader = "t,A,B,C,a,b,c,R,Phi,Cbound,dR_residual,P";

void write_csv(std::ostream& out, const PinchTrace& trace);
nlohmann::json summary_json(const PinchTrace& trace);

}  // namespace pinchlab
