#include "slm/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace slm {

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
    return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 18, tol);
}

}  // namespace slm
