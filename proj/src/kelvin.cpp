#include "slm/kelvin.hpp"

#include <cmath>
#include <stdexcept>

namespace slm::kelvin {

namespace {

double norm_of(std::span<const double> x) {
    double s = 0.0;
    for (double c : x) s += c * c;
    return std::sqrt(s);
}

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

bool ScalarField::valid_at(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != d) return false;
    if (norm_of(x) == 0.0) return false;
    return guard ? guard(x) : true;
}

ScalarField make_field(int d, std::function<double(std::span<const double>)> eval,
                       std::function<bool(std::span<const double>)> guard) {
    require(d >= 3, "make_field: Kelvin transform needs d >= 3");
    ScalarField f;
    f.d = d;
    f.eval = std::move(eval);
    f.guard = std::move(guard);
    return f;
}

std::vector<double> invert_point(std::span<const double> x) {
    const double n2 = [&] {
        double s = 0.0;
        for (double c : x) s += c * c;
        return s;
    }();
    require(n2 > 0.0, "invert_point: zero vector");
    std::vector<double> y(x.begin(), x.end());
    for (double& c : y) c /= n2;
    return y;
}

ScalarField kelvin_transform(const ScalarField& u) {
    require(u.d >= 3, "kelvin_transform: needs d >= 3");
    ScalarField k;
    k.d = u.d;
    const int d = u.d;
    auto inner = u;  // copy keeps the transform self-contained
    k.eval = [inner, d](std::span<const double> y) {
        const double ny = norm_of(y);
        std::vector<double> x(y.begin(), y.end());
        for (double& c : x) c /= ny * ny;
        return std::pow(ny, 2.0 - static_cast<double>(d)) * inner.eval(x);
    };
    k.guard = [inner](std::span<const double> y) {
        if (norm_of(y) == 0.0) return false;
        const auto x = invert_point(y);
        return inner.valid_at(x);
    };
    return k;
}

namespace {

// centered 2d+1-point finite-difference Laplacian
double fd_laplacian(const ScalarField& f, std::span<const double> p, double h) {
    std::vector<double> q(p.begin(), p.end());
    const double center = f.eval(q);
    double lap = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        const double orig = q[i];
        q[i] = orig + h;
        if (!f.valid_at(q)) throw std::invalid_argument("fd stencil exits the field domain");
        const double up = f.eval(q);
        q[i] = orig - h;
        if (!f.valid_at(q)) throw std::invalid_argument("fd stencil exits the field domain");
        const double dn = f.eval(q);
        q[i] = orig;
        lap += up - 2.0 * center + dn;
    }
    return lap / (h * h);
}

}  // namespace

double laplacian_commutation_residual(const ScalarField& u, std::span<const double> y,
                                      double h) {
    require(h > 0.0, "laplacian_commutation_residual: h must be positive");
    require(static_cast<int>(y.size()) == u.d, "laplacian_commutation_residual: dimension mismatch");
    const ScalarField ku = kelvin_transform(u);
    if (!ku.valid_at(y)) throw std::invalid_argument("laplacian_commutation_residual: y invalid");
    const double lhs = fd_laplacian(ku, y, h);

    ScalarField v;
    v.d = u.d;
    v.eval = [u, h](std::span<const double> x) {
        double n2 = 0.0;
        for (double c : x) n2 += c * c;
        return n2 * n2 * fd_laplacian(u, x, h);
    };
    v.guard = u.guard;
    const ScalarField kv = kelvin_transform(v);
    const double rhs = kv.eval(y);
    return std::abs(lhs - rhs);
}

namespace {

struct SphereOutcome {
    std::array<double, 3> x{};  // X_{t ∧ tau}
    bool absorbed = false;
};

// 3-D BM absorbed on the inner sphere |x| = r; endpoint test plus half-space
// bridge on |x| - r; exit states are projected onto the sphere.
SphereOutcome run_sphere_path(const std::array<double, 3>& x0, double r, double t, double dt,
                              RandomSource& src,
                              const std::function<void(const std::array<double, 3>&, bool)>& on_step) {
    SphereOutcome st;
    st.x = x0;
    const std::size_t n = static_cast<std::size_t>(std::ceil(t / dt));
    const double step = t / static_cast<double>(n);
    const double sdt = std::sqrt(step);
    for (std::size_t k = 0; k < n; ++k) {
        if (st.absorbed) {
            if (on_step) on_step(st.x, true);
            continue;
        }
        std::array<double, 3> next;
        for (int i = 0; i < 3; ++i) next[i] = st.x[i] + sdt * src.gaussian();
        const double r_prev = norm_of(st.x);
        const double r_next = norm_of(next);
        bool hit = r_next <= r;
        if (!hit) {
            const double d0 = r_prev - r;
            const double d1 = r_next - r;
            hit = src.uniform01() < std::exp(-2.0 * d0 * d1 / step);
        }
        if (hit) {
            std::array<double, 3> mid;
            for (int i = 0; i < 3; ++i) mid[i] = 0.5 * (st.x[i] + next[i]);
            const double mr = norm_of(mid);
            for (int i = 0; i < 3; ++i) st.x[i] = mr > 0.0 ? mid[i] * r / mr : r;
            st.absorbed = true;
        } else {
            st.x = next;
        }
        if (on_step) on_step(st.x, st.absorbed);
    }
    return st;
}

}  // namespace

ConformalCheck conformal_inversion_check(double r, std::array<double, 3> x0,
                                         const std::function<double(std::span<const double>)>& u,
                                         double u_bound, double t, std::size_t n_paths,
                                         RandomSource src, double dt, unsigned workers) {
    require(r > 0.0 && r < 1.0, "conformal_inversion_check: need 0 < r < 1");
    require(std::isfinite(u_bound) && u_bound > 0.0,
            "conformal_inversion_check: U must come with a finite bound");
    const double r0 = norm_of(x0);
    require(r0 > r, "conformal_inversion_check: x0 must lie outside the ball");
    require(t > 0.0 && dt > 0.0, "conformal_inversion_check: need positive t and dt");

    const double w0 = 1.0 / r0;  // |x0|^{2-d}, d = 3
    std::vector<double> lhs(n_paths), rhs(n_paths);
    parallel_for_paths(n_paths, workers, [&](std::size_t i) {
        RandomSource stream = src.substream(i);
        const auto o = run_sphere_path(x0, r, t, dt, stream, {});
        const double uval = u(o.x);
        if (std::abs(uval) > u_bound)
            throw std::invalid_argument("conformal_inversion_check: U exceeded its declared bound");
        lhs[i] = w0 * uval;
        // reweighted inverted route: phi |Y|^{2-d} U(Y/|Y|^2), Y = X/|X|^2
        const double nx = norm_of(o.x);
        const double phi = (1.0 / nx) / w0;
        const auto y = invert_point(o.x);
        const double ny = norm_of(y);
        const auto back = invert_point(y);
        rhs[i] = phi * (1.0 / ny) * u(back);
    });
    ConformalCheck out;
    out.lhs = mc_reduce(lhs, src.seed());
    out.rhs = mc_reduce(rhs, src.seed());
    return out;
}

ConformalDiagnostics conformal_martingale_diagnostics(double r, std::array<double, 3> x0,
                                                      std::span<const double> t_list,
                                                      std::size_t n_paths, RandomSource src,
                                                      double dt, unsigned workers) {
    require(r > 0.0 && r < 1.0, "conformal_martingale_diagnostics: need 0 < r < 1");
    const double r0 = norm_of(x0);
    require(r0 > r, "conformal_martingale_diagnostics: x0 must lie outside the ball");
    require(!t_list.empty(), "conformal_martingale_diagnostics: empty t list");
    for (std::size_t k = 1; k < t_list.size(); ++k)
        require(t_list[k] > t_list[k - 1], "conformal_martingale_diagnostics: t list must increase");

    const double t_max = t_list.back();
    const std::size_t n_steps = static_cast<std::size_t>(std::ceil(t_max / dt));
    const double step = t_max / static_cast<double>(n_steps);
    // map each report time to the nearest step index
    std::vector<std::size_t> report_idx(t_list.size());
    for (std::size_t k = 0; k < t_list.size(); ++k)
        report_idx[k] = static_cast<std::size_t>(std::llround(t_list[k] / step));

    const std::size_t n_t = t_list.size();
    std::vector<std::array<std::vector<double>, 3>> coords(n_t);
    for (auto& row : coords)
        for (auto& v : row) v.resize(n_paths);
    std::array<std::array<std::vector<double>, 3>, 3> cov;
    for (auto& row : cov)
        for (auto& v : row) v.resize(n_paths);

    parallel_for_paths(n_paths, workers, [&](std::size_t i) {
        RandomSource stream = src.substream(i);
        auto y_prev = invert_point(x0);
        double br[3][3] = {};
        std::size_t step_no = 0;
        std::size_t next_report = 0;
        run_sphere_path(x0, r, t_max, dt, stream,
                        [&](const std::array<double, 3>& x, bool) {
                            ++step_no;
                            const auto y = invert_point(x);
                            for (int a = 0; a < 3; ++a)
                                for (int b = 0; b < 3; ++b)
                                    br[a][b] += (y[a] - y_prev[a]) * (y[b] - y_prev[b]);
                            while (next_report < n_t && report_idx[next_report] == step_no) {
                                const double phi = r0 / norm_of(x);
                                for (int a = 0; a < 3; ++a)
                                    coords[next_report][a][i] = phi * y[a];
                                ++next_report;
                            }
                            y_prev = y;
                        });
        // weight the accumulated brackets by phi at t_max; |Y_T| = 1/|X_T|,
        // so phi = |X_T|^{2-d}/|x0|^{2-d} = r0 |Y_T|
        const double phi = r0 * norm_of(y_prev);
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) cov[a][b][i] = phi * br[a][b];
    });

    ConformalDiagnostics out;
    out.t_list.assign(t_list.begin(), t_list.end());
    out.coord_means.resize(n_t);
    for (std::size_t k = 0; k < n_t; ++k)
        for (int a = 0; a < 3; ++a)
            out.coord_means[k][a] = mc_reduce(coords[k][a], src.seed());
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            out.covariation[a][b] = mc_reduce(cov[a][b], src.seed());
    return out;
}

}  // namespace slm::kelvin
