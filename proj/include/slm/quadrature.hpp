#pragma once

#include <functional>

namespace slm {

// Adaptive Gauss-Kronrod integration of f over [a, b] to absolute/relative
// tolerance tol.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol = 1e-10);

}  // namespace slm
