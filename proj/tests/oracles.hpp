// Test-only oracles, deliberately independent of the solver paths they
// check: dense active-set enumeration for small LCPs, and an explicit-in-
// time scheme on a fine grid for the freezing flow.
#ifndef STOPFLOW_TESTS_ORACLES_HPP
#define STOPFLOW_TESTS_ORACLES_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

namespace oracles {

// dense Gaussian elimination with partial pivoting
inline std::vector<double> dense_solve(std::vector<std::vector<double>> a,
                                       std::vector<double> b) {
    const int n = static_cast<int>(b.size());
    for (int c = 0; c < n; ++c) {
        int p = c;
        for (int r = c + 1; r < n; ++r)
            if (std::fabs(a[r][c]) > std::fabs(a[p][c])) p = r;
        std::swap(a[c], a[p]);
        std::swap(b[c], b[p]);
        if (std::fabs(a[c][c]) < 1e-14) throw std::runtime_error("singular");
        for (int r = c + 1; r < n; ++r) {
            const double m = a[r][c] / a[c][c];
            for (int k = c; k < n; ++k) a[r][k] -= m * a[c][k];
            b[r] -= m * b[c];
        }
    }
    std::vector<double> x(n);
    for (int r = n - 1; r >= 0; --r) {
        double s = b[r];
        for (int k = r + 1; k < n; ++k) s -= a[r][k] * x[k];
        x[r] = s / a[r][r];
    }
    return x;
}

// Brute-force LCP solve by enumerating active sets: w >= 0, A w + q >= 0,
// w . (A w + q) = 0. Feasible only for a handful of unknowns.
inline std::vector<double> lcp_enumerate(const std::vector<std::vector<double>>& A,
                                         const std::vector<double>& q, double tol = 1e-9) {
    const int n = static_cast<int>(q.size());
    if (n > 20) throw std::runtime_error("lcp_enumerate: too many unknowns");
    for (unsigned long mask = 0; mask < (1ul << n); ++mask) {
        std::vector<int> act;
        for (int i = 0; i < n; ++i)
            if (mask & (1ul << i)) act.push_back(i);
        std::vector<double> w(n, 0.0);
        if (!act.empty()) {
            std::vector<std::vector<double>> As(act.size(),
                                                std::vector<double>(act.size()));
            std::vector<double> qs(act.size());
            for (std::size_t r = 0; r < act.size(); ++r) {
                qs[r] = -q[act[r]];
                for (std::size_t c = 0; c < act.size(); ++c) As[r][c] = A[act[r]][act[c]];
            }
            std::vector<double> ws;
            try {
                ws = dense_solve(As, qs);
            } catch (const std::runtime_error&) {
                continue;
            }
            bool ok = true;
            for (double v : ws)
                if (v < -tol) ok = false;
            if (!ok) continue;
            for (std::size_t r = 0; r < act.size(); ++r) w[act[r]] = std::max(ws[r], 0.0);
        }
        bool feasible = true;
        for (int i = 0; i < n && feasible; ++i) {
            double r = q[i];
            for (int j = 0; j < n; ++j) r += A[i][j] * w[j];
            if (r < -tol) feasible = false;
            if (w[i] > tol && std::fabs(r) > tol) feasible = false;
        }
        if (feasible) return w;
    }
    throw std::runtime_error("lcp_enumerate: no feasible active set");
}

// Explicit projected scheme for the freezing flow on a uniform 1D grid:
// w <- max(0, w + dt (w_xx / 2 - nu / 2)), stable for dt <= h^2.
// Returns the first time w(x_probe) falls below eps (linear in t).
struct ExplicitFreeze {
    std::vector<double> x;
    std::vector<double> w;
    std::vector<double> nu;
    double h = 0.0;

    static ExplicitFreeze init(double lo, double hi, int n, double (*w0)(double),
                               double (*nu_fn)(double)) {
        ExplicitFreeze e;
        e.h = (hi - lo) / (n - 1);
        e.x.resize(n);
        e.w.resize(n);
        e.nu.resize(n);
        for (int i = 0; i < n; ++i) {
            e.x[i] = lo + i * e.h;
            e.w[i] = w0(e.x[i]);
            e.nu[i] = nu_fn(e.x[i]);
        }
        return e;
    }

    double first_hit(double x_probe, double eps, double dt, double t_max) {
        const int n = static_cast<int>(w.size());
        const int ip = static_cast<int>(std::lround((x_probe - x[0]) / h));
        std::vector<double> next(n, 0.0);
        double t = 0.0;
        double prev_val = w[ip];
        if (prev_val <= eps) return 0.0;
        while (t < t_max) {
            for (int i = 1; i + 1 < n; ++i) {
                const double lap = (w[i - 1] - 2.0 * w[i] + w[i + 1]) / (h * h);
                next[i] = std::max(0.0, w[i] + dt * (0.5 * lap - 0.5 * nu[i]));
            }
            next[0] = next[n - 1] = 0.0;
            w.swap(next);
            t += dt;
            const double val = w[ip];
            if (val <= eps) {
                const double dv = prev_val - val;
                const double frac = dv > 0.0 ? (prev_val - eps) / dv : 1.0;
                return t - dt + frac * dt;
            }
            prev_val = val;
        }
        throw std::runtime_error("explicit oracle: probe never extinguished");
    }
};

} // namespace oracles

#endif
