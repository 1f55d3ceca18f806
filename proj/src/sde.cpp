#include "slm/sde.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace slm::sde {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

void freeze_from(AbsorbedPath& p, std::size_t k, std::span<const double> state) {
    p.absorption_index = k;
    p.absorption_state.assign(state.begin(), state.end());
    for (std::size_t j = k; j < p.n_times(); ++j)
        std::copy(state.begin(), state.end(),
                  p.data.begin() + static_cast<std::ptrdiff_t>(j * state.size()));
}

AbsorbedPath blank_path(const GridPtr& grid, int dim) {
    AbsorbedPath p;
    p.grid = grid;
    p.dim = dim;
    p.data.resize(grid->size() * static_cast<std::size_t>(dim));
    return p;
}

}  // namespace

ProcessModel ProcessModel::bm_absorbed(double x0) {
    ProcessModel m;
    m.family = Family::BmAbsorbedAtZero;
    m.x0 = x0;
    return m;
}

ProcessModel ProcessModel::bm_free(std::vector<double> start) {
    ProcessModel m;
    m.family = Family::BmFree;
    m.start_vec = std::move(start);
    return m;
}

ProcessModel ProcessModel::bes3(double x0) {
    ProcessModel m;
    m.family = Family::Bes3;
    m.x0 = x0;
    return m;
}

ProcessModel ProcessModel::inverse_bes3(double x0) {
    ProcessModel m;
    m.family = Family::InverseBes3;
    m.x0 = x0;
    return m;
}

ProcessModel ProcessModel::besq(int delta, double z) {
    ProcessModel m;
    m.family = Family::Besq;
    m.besq_dim = delta;
    m.x0 = z;
    return m;
}

ProcessModel ProcessModel::gbm(double s0, double sigma) {
    ProcessModel m;
    m.family = Family::Gbm;
    m.x0 = s0;
    m.sigma = sigma;
    return m;
}

ProcessModel ProcessModel::dyson(std::vector<double> start) {
    ProcessModel m;
    m.family = Family::Dyson;
    m.start_vec = std::move(start);
    return m;
}

ProcessModel ProcessModel::spliced_bubble(double s0) {
    ProcessModel m;
    m.family = Family::SplicedBubble;
    m.x0 = s0;
    return m;
}

int ProcessModel::dimension() const {
    switch (family) {
        case Family::BmFree:
        case Family::Dyson:
            return static_cast<int>(start_vec.size());
        default:
            return 1;
    }
}

void ProcessModel::validate() const {
    switch (family) {
        case Family::BmAbsorbedAtZero:
            require(x0 > 0.0, "absorbed BM: x0 must be positive");
            break;
        case Family::BmFree:
            require(!start_vec.empty(), "free BM: start vector required");
            break;
        case Family::Bes3:
            require(x0 >= 0.0, "BES(3): x0 must be nonnegative");
            break;
        case Family::InverseBes3:
            require(x0 > 0.0, "inverse BES(3): x0 must be positive");
            break;
        case Family::Besq:
            require(besq_dim == 0 || besq_dim == 4, "BESQ: dimension must be 0 or 4");
            require(x0 >= 0.0, "BESQ: z must be nonnegative");
            break;
        case Family::Gbm:
            require(x0 > 0.0, "GBM: s0 must be positive");
            require(sigma > 0.0, "GBM: sigma must be positive");
            break;
        case Family::Dyson: {
            const std::size_t n = start_vec.size();
            require(n >= 2 && n <= 8, "Dyson: need 2 <= n <= 8");
            for (std::size_t i = 1; i < n; ++i)
                require(start_vec[i] > start_vec[i - 1], "Dyson: start must be strictly increasing");
            break;
        }
        case Family::SplicedBubble:
            require(x0 > 0.0, "spliced bubble: s0 must be positive");
            break;
    }
}

AbsorbedPath simulate_absorbed_bm(double x0, const GridPtr& grid, RandomSource& src) {
    require(x0 > 0.0, "simulate_absorbed_bm: x0 must be positive");
    AbsorbedPath p = blank_path(grid, 1);
    double x = x0;
    p.data[0] = x;
    const double zero = 0.0;
    for (std::size_t k = 1; k < p.n_times(); ++k) {
        const double dt = grid->times[k] - grid->times[k - 1];
        const double y = x + std::sqrt(dt) * src.gaussian();
        if (y <= 0.0 || src.uniform01() < std::exp(-2.0 * x * y / dt)) {
            freeze_from(p, k, {&zero, 1});
            return p;
        }
        x = y;
        p.data[k] = x;
    }
    return p;
}

AbsorbedPath simulate_bes3(double x0, const GridPtr& grid, RandomSource& src) {
    require(x0 >= 0.0, "simulate_bes3: x0 must be nonnegative");
    AbsorbedPath p = blank_path(grid, 1);
    std::array<double, 3> w = {x0, 0.0, 0.0};
    p.data[0] = x0;
    for (std::size_t k = 1; k < p.n_times(); ++k) {
        const double sdt = std::sqrt(grid->times[k] - grid->times[k - 1]);
        for (double& c : w) c += sdt * src.gaussian();
        p.data[k] = std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]);
    }
    return p;
}

AbsorbedPath simulate_inverse_bes3(double x0, const GridPtr& grid, RandomSource& src) {
    require(x0 > 0.0, "simulate_inverse_bes3: x0 must be positive");
    AbsorbedPath p = simulate_bes3(x0, grid, src);
    for (double& v : p.data) v = 1.0 / v;
    return p;
}

AbsorbedPath simulate_besq(int delta, double z, const GridPtr& grid, RandomSource& src) {
    require(delta == 0 || delta == 4, "simulate_besq: dimension must be 0 or 4");
    require(z >= 0.0, "simulate_besq: z must be nonnegative");
    AbsorbedPath p = blank_path(grid, 1);
    double x = z;
    p.data[0] = x;
    const double zero = 0.0;
    for (std::size_t k = 1; k < p.n_times(); ++k) {
        const double dt = grid->times[k] - grid->times[k - 1];
        // exact transition: Z' = dt * chi^2(delta + 2N), N ~ Poisson(z / (2 dt))
        const std::int64_t n_mix = x > 0.0 ? poisson_sample(src, x / (2.0 * dt)) : 0;
        const double dof = static_cast<double>(delta) + 2.0 * static_cast<double>(n_mix);
        if (dof == 0.0) {
            freeze_from(p, k, {&zero, 1});
            return p;
        }
        x = dt * chi_square_sample(src, dof);
        p.data[k] = x;
    }
    return p;
}

AbsorbedPath simulate_gbm(double s0, double sigma, const GridPtr& grid, RandomSource& src) {
    require(s0 > 0.0 && sigma > 0.0, "simulate_gbm: s0 and sigma must be positive");
    AbsorbedPath p = blank_path(grid, 1);
    double s = s0;
    p.data[0] = s;
    for (std::size_t k = 1; k < p.n_times(); ++k) {
        const double dt = grid->times[k] - grid->times[k - 1];
        s *= std::exp(sigma * std::sqrt(dt) * src.gaussian() - 0.5 * sigma * sigma * dt);
        p.data[k] = s;
    }
    return p;
}

AbsorbedPath simulate_bm_free(std::span<const double> start, const GridPtr& grid,
                              RandomSource& src) {
    require(!start.empty(), "simulate_bm_free: start vector required");
    const int n = static_cast<int>(start.size());
    AbsorbedPath p = blank_path(grid, n);
    std::vector<double> x(start.begin(), start.end());
    std::copy(x.begin(), x.end(), p.data.begin());
    for (std::size_t k = 1; k < p.n_times(); ++k) {
        const double sdt = std::sqrt(grid->times[k] - grid->times[k - 1]);
        for (int i = 0; i < n; ++i) x[i] += sdt * src.gaussian();
        std::copy(x.begin(), x.end(), p.data.begin() + static_cast<std::ptrdiff_t>(k * start.size()));
    }
    return p;
}

namespace {

// One cyclic-Jacobi pass infrastructure for Hermitian matrices up to 8x8.
class HermitianJacobi {
public:
    HermitianJacobi(std::span<const std::complex<double>> a, int n) : n_(n) {
        std::copy(a.begin(), a.end(), m_.begin());
    }

    std::complex<double>& at(int i, int j) { return m_[static_cast<std::size_t>(i * n_ + j)]; }

    double off_diag_sq() {
        double s = 0.0;
        for (int p = 0; p < n_ - 1; ++p)
            for (int q = p + 1; q < n_; ++q) s += std::norm(at(p, q));
        return 2.0 * s;
    }

    double frobenius_sq() {
        double s = 0.0;
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j) s += std::norm(at(i, j));
        return s;
    }

    void rotate(int p, int q) {
        const double r = std::abs(at(p, q));
        if (r == 0.0) return;
        const std::complex<double> phase = at(p, q) / r;
        const double app = at(p, p).real();
        const double aqq = at(q, q).real();
        const double tau = (aqq - app) / (2.0 * r);
        const double sg = tau >= 0.0 ? 1.0 : -1.0;
        const double t = -sg / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (int i = 0; i < n_; ++i) {
            if (i == p || i == q) continue;
            const std::complex<double> aip = at(i, p);
            const std::complex<double> aiq = at(i, q);
            at(i, p) = c * aip + s * std::conj(phase) * aiq;
            at(i, q) = -s * phase * aip + c * aiq;
            at(p, i) = std::conj(at(i, p));
            at(q, i) = std::conj(at(i, q));
        }
        at(p, p) = app * c * c + aqq * s * s + 2.0 * s * c * r;
        at(q, q) = app * s * s + aqq * c * c - 2.0 * s * c * r;
        at(p, q) = at(q, p) = 0.0;
    }

    std::vector<double> eigenvalues() {
        const double stop = frobenius_sq() * 1e-30;
        for (int sweep = 0; sweep < 60; ++sweep) {
            const double off = off_diag_sq();
            if (off <= stop || off == 0.0) break;
            for (int p = 0; p < n_ - 1; ++p)
                for (int q = p + 1; q < n_; ++q) rotate(p, q);
        }
        std::vector<double> ev(static_cast<std::size_t>(n_));
        for (int i = 0; i < n_; ++i) ev[i] = at(i, i).real();
        std::sort(ev.begin(), ev.end());
        return ev;
    }

private:
    int n_;
    std::array<std::complex<double>, 64> m_{};
};

}  // namespace

std::vector<double> hermitian_eigenvalues(std::span<const std::complex<double>> a, int n) {
    require(n >= 1 && n <= 8, "hermitian_eigenvalues: need 1 <= n <= 8");
    require(a.size() == static_cast<std::size_t>(n) * static_cast<std::size_t>(n),
            "hermitian_eigenvalues: size mismatch");
    return HermitianJacobi(a, n).eigenvalues();
}

AbsorbedPath simulate_dyson(std::span<const double> start, const GridPtr& grid,
                            RandomSource& src) {
    const int n = static_cast<int>(start.size());
    require(n >= 2 && n <= 8, "simulate_dyson: need 2 <= n <= 8");
    for (int i = 1; i < n; ++i)
        require(start[i] > start[i - 1],
                "simulate_dyson: start must be strictly increasing");

    AbsorbedPath p = blank_path(grid, n);
    std::array<std::complex<double>, 64> h{};
    auto at = [&](int i, int j) -> std::complex<double>& {
        return h[static_cast<std::size_t>(i * n + j)];
    };
    for (int i = 0; i < n; ++i) at(i, i) = start[i];
    std::copy(start.begin(), start.end(), p.data.begin());

    for (std::size_t k = 1; k < p.n_times(); ++k) {
        const double sdt = std::sqrt(grid->times[k] - grid->times[k - 1]);
        for (int i = 0; i < n; ++i) at(i, i) += sdt * src.gaussian();
        for (int i = 0; i < n - 1; ++i)
            for (int j = i + 1; j < n; ++j) {
                const std::complex<double> d(sdt * src.gaussian(), sdt * src.gaussian());
                at(i, j) += d;
                at(j, i) = std::conj(at(i, j));
            }
        const auto ev = hermitian_eigenvalues({h.data(), static_cast<std::size_t>(n * n)}, n);
        std::copy(ev.begin(), ev.end(), p.data.begin() + static_cast<std::ptrdiff_t>(k * static_cast<std::size_t>(n)));
    }
    return p;
}

namespace {

// Segment layout of the spliced bubble: [2i, 2i+1) exponential BM,
// [2i+1, 2i+2) a rescaled inverse BES(3) restarted at the join.
struct SplicedState {
    double value;
    long long segment = 0;
    bool in_bessel = false;
    double seg_scale = 1.0;          // S at the start of the Bessel segment
    std::array<double, 3> w{1.0, 0.0, 0.0};

    void sync_segment(double now) {
        const long long seg = static_cast<long long>(std::floor(now));
        if (seg == segment) return;
        segment = seg;
        in_bessel = (seg % 2LL) != 0;
        if (in_bessel) {
            seg_scale = value;
            w = {1.0, 0.0, 0.0};
        }
    }

    void advance(double dt, RandomSource& src) {
        if (dt <= 0.0) return;
        if (in_bessel) {
            const double sdt = std::sqrt(dt);
            for (double& c : w) c += sdt * src.gaussian();
            value = seg_scale / std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]);
        } else {
            value *= std::exp(std::sqrt(dt) * src.gaussian() - 0.5 * dt);
        }
    }
};

}  // namespace

AbsorbedPath simulate_spliced_bubble(const GridPtr& grid, RandomSource& src, double s0) {
    require(s0 > 0.0, "simulate_spliced_bubble: s0 must be positive");
    require(grid->times.front() == 0.0, "simulate_spliced_bubble: grid must start at 0");
    require(grid->t_end() >= 2.0 * (1.0 - 1e-12),
            "simulate_spliced_bubble: grid must span at least [0, 2)");

    AbsorbedPath p = blank_path(grid, 1);
    SplicedState st{s0};
    p.data[0] = s0;
    double now = 0.0;
    for (std::size_t k = 1; k < p.n_times(); ++k) {
        const double target = grid->times[k];
        // advance segment by segment, never stepping across a component join
        while (now < target) {
            st.sync_segment(now);
            const double boundary = static_cast<double>(st.segment) + 1.0;
            const double stop = std::min(boundary, target);
            st.advance(stop - now, src);
            now = stop;
        }
        p.data[k] = st.value;
    }
    return p;
}

AbsorbedPath simulate(const ProcessModel& model, const GridPtr& grid, RandomSource& src) {
    model.validate();
    switch (model.family) {
        case ProcessModel::Family::BmAbsorbedAtZero:
            return simulate_absorbed_bm(model.x0, grid, src);
        case ProcessModel::Family::BmFree:
            return simulate_bm_free(model.start_vec, grid, src);
        case ProcessModel::Family::Bes3:
            return simulate_bes3(model.x0, grid, src);
        case ProcessModel::Family::InverseBes3:
            return simulate_inverse_bes3(model.x0, grid, src);
        case ProcessModel::Family::Besq:
            return simulate_besq(model.besq_dim, model.x0, grid, src);
        case ProcessModel::Family::Gbm:
            return simulate_gbm(model.x0, model.sigma, grid, src);
        case ProcessModel::Family::Dyson:
            return simulate_dyson(model.start_vec, grid, src);
        case ProcessModel::Family::SplicedBubble:
            return simulate_spliced_bubble(grid, src, model.x0);
    }
    throw std::logic_error("simulate: unknown family");
}

void mc_paths(const ProcessModel& model, const GridPtr& grid, std::size_t n_paths,
              const RandomSource& src, unsigned workers,
              const std::function<void(std::size_t, const AbsorbedPath&)>& consume) {
    model.validate();
    if (n_paths == 0) throw std::invalid_argument("mc_paths: n_paths must be positive");
    parallel_for_paths(n_paths, workers, [&](std::size_t i) {
        RandomSource stream = src.substream(i);
        const AbsorbedPath p = simulate(model, grid, stream);
        consume(i, p);
    });
}

std::vector<std::vector<double>> sample_scalar_at(
    const ProcessModel& model, const std::function<double(double)>& fn,
    std::span<const double> t_list, std::size_t n_paths, const RandomSource& src,
    unsigned workers) {
    if (model.dimension() != 1)
        throw std::invalid_argument("sample_scalar_at: scalar models only");
    const auto grid = report_grid(t_list);
    std::vector<std::vector<double>> out(t_list.size(), std::vector<double>(n_paths));
    mc_paths(model, grid, n_paths, src, workers, [&](std::size_t i, const AbsorbedPath& p) {
        for (std::size_t k = 0; k < t_list.size(); ++k)
            out[k][i] = fn(p.scalar(k + 1));
    });
    return out;
}

}  // namespace slm::sde
