#pragma once

#include <cstdint>
#include <vector>

#include "snapkit/fock.hpp"

namespace snapkit {

struct LearningSchedule {
  enum class Method { adam, descent };   // descent = plain gradient step + backtracking
  enum class Decay { cosine, constant };
  Method method = Method::adam;
  Decay decay = Decay::cosine;
  double initial_rate = 0.05;
};

struct SynthConfig {
  int n_snaps = 2;
  int m_max = 10;              // highest Fock index the SNAPs may address
  double lasso_lambda = 1e-3;
  int max_iters = 2000;
  double target_fidelity = 0.999;  // early-stop threshold
  std::uint64_t seed = 1;
  int restarts = 10;
  int polish_iters = 300;      // lambda=0 refinement of the best restart
  LearningSchedule schedule;
  int threads = 1;
  bool pin_final_displacement = false;  // hold alpha_{n+1} at 0 (sequence ends on a SNAP)

  void validate() const;
};

struct SynthResult {
  GateSequence sequence;
  double achieved_fidelity = 0.0;
  std::vector<double> cost_trace;  // winning restart, polish appended
  int iterations = 0;
  bool converged = false;
  int working_dim = 0;
};

// best restart stayed below fidelity 0.5
struct SynthesisFailure : std::runtime_error {
  SynthResult best;
  SynthesisFailure(const std::string& msg, SynthResult b)
      : std::runtime_error(msg), best(std::move(b)) {}
};

// [1 - F(target, seq applied to |0>)] + lambda * sum_i,m |theta_i,m|
double synth_cost(const GateSequence& seq, const StateVector& target, double lambda);

// Partials of synth_cost with respect to (Re a_1, Im a_1, ..., Re a_{n+1},
// Im a_{n+1}, theta_1,0.., theta_2,0..). SNAP derivatives are analytic
// (dS/dtheta_j = i|j><j|S); displacement derivatives use the exact Fréchet
// derivative of the matrix exponential; the LASSO term contributes
// lambda*sign(theta) with sign(0)=0.
RealVector synth_gradient(const GateSequence& seq, const StateVector& target, double lambda);

SynthResult synthesize(const StateVector& target, const SynthConfig& config);

}  // namespace snapkit
