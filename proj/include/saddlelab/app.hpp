#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "saddlelab/center_stable.hpp"
#include "saddlelab/config.hpp"
#include "saddlelab/functions.hpp"
#include "saddlelab/sgd.hpp"

namespace saddlelab {

enum exit_code : int { exit_ok = 0, exit_validation = 1, exit_runtime = 2 };

/// Entry point of the command-line tool; args excludes the program name.
/// Returns the process exit code.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Builders shared by the tool and the tests.
Problem problem_from(const ExperimentConfig& cfg);
/// Unstable tangent directions at the critical point: tangent basis times
/// the eigenvectors of the Riemannian Hessian with negative eigenvalues.
Matrix unstable_directions(const Problem& p);
NoiseModel noise_from(const ExperimentConfig& cfg, const Problem& p);
SGDConfig sgd_from(const ExperimentConfig& cfg);
ConstructedSystem system_from(const ExperimentConfig& cfg);
AbstractConfig abstract_from(const ExperimentConfig& cfg, const ConstructedSystem& sys);

/// "%.17g"
std::string format_number(double v);

}  // namespace saddlelab
