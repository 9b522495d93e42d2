#pragma once

// Randomized property suites shared by the unit tests (small case counts)
// and the acceptance runner (full counts with timing).

#include <cmath>
#include <sstream>
#include <string>

#include "htgn/manifold.hpp"
#include "htgn/rng.hpp"

namespace suites {

struct SuiteResult {
    bool pass = true;
    std::string detail;

    void fail(const std::string& msg) {
        pass = false;
        if (detail.empty()) detail = msg;
    }
};

inline htgn::manifold::Vec random_tangent(int d, double max_norm, htgn::Rng& rng) {
    htgn::manifold::Vec v(d);
    double s = 0;
    for (double& x : v) {
        x = rng.uniform(-1, 1);
        s += x * x;
    }
    const double target = rng.uniform(1e-3, max_norm);
    for (double& x : v) x *= target / std::sqrt(s);
    return v;
}

inline htgn::manifold::Vec random_point(int d, double max_norm, double c, htgn::Rng& rng) {
    return htgn::manifold::project_to_ball(random_tangent(d, max_norm / std::sqrt(c), rng), c);
}

// The manifold invariants: round trip, identity/cancellation, metric axioms,
// flat limit, gradient-vs-FD, ball containment.
inline SuiteResult manifold_property_suite(int cases, uint64_t seed) {
    using namespace htgn::manifold;
    htgn::Rng rng(htgn::mix_seed(seed, "manifold-props"));
    SuiteResult r;
    const int d = 4;

    for (int i = 0; i < cases && r.pass; ++i) {
        const double c = rng.uniform(0.25, 2.0);

        // round trip within 1e-8 for |a| <= 5; for c != 1 the saturation
        // point scales as 1/sqrt(c) (tanh reaches the projection shell at
        // sqrt(c)|a| ~ 6.1), so cap draws below it
        {
            Vec a = random_tangent(d, std::min(5.0, 6.0 / std::sqrt(c)), rng);
            Vec back = logmap0(expmap0(a, c), c);
            for (int j = 0; j < d; ++j)
                if (std::fabs(back[j] - a[j]) > 1e-8) {
                    std::ostringstream os;
                    os << "roundtrip error " << std::fabs(back[j] - a[j]) << " at case " << i;
                    r.fail(os.str());
                }
        }
        // left identity and cancellation within 1e-10
        {
            Vec v = random_point(d, 0.9, c, rng);
            Vec zero(d, 0.0);
            Vec lv = mobius_add(zero, v, c);
            Vec nv = v;
            for (double& x : nv) x = -x;
            Vec cancel = mobius_add(v, nv, c);
            for (int j = 0; j < d; ++j) {
                if (std::fabs(lv[j] - v[j]) > 1e-10) r.fail("left identity violated");
                if (std::fabs(cancel[j]) > 1e-10) r.fail("cancellation violated");
            }
        }
        // metric symmetry and triangle inequality
        {
            Vec u = random_point(d, 0.9, c, rng);
            Vec v = random_point(d, 0.9, c, rng);
            Vec w = random_point(d, 0.9, c, rng);
            const double duv = dist(u, v, c), dvu = dist(v, u, c);
            if (std::fabs(duv - dvu) > 1e-10) r.fail("distance not symmetric");
            if (dist(u, u, c) > 1e-10) r.fail("dist(u,u) != 0");
            if (dist(u, w, c) > dist(u, v, c) + dist(v, w, c) + 1e-8)
                r.fail("triangle inequality violated");
        }
        // flat limit: c = 1e-6, |u|,|v| <= 0.1
        {
            const double cf = 1e-6;
            Vec u = random_tangent(d, 0.1, rng);
            Vec v = random_tangent(d, 0.1, rng);
            double e2 = 0;
            for (int j = 0; j < d; ++j) e2 += (u[j] - v[j]) * (u[j] - v[j]);
            const double flat = 2.0 * std::sqrt(e2);
            if (flat > 1e-6) {
                const double dh = dist(u, v, cf);
                if (std::fabs(dh - flat) / flat > 1e-3) r.fail("flat limit violated");
            }
        }
        // ball containment after operations
        {
            Vec a = random_tangent(d, 40.0, rng);
            Vec p = expmap0(a, c);
            if (c * dot(p, p) > (1.0 - kBallEps) * (1.0 - kBallEps) + 1e-15)
                r.fail("expmap output escaped the ball");
            Vec q = mobius_add(project_to_ball(random_tangent(d, 3.0, rng), c), p, c);
            Vec qp = project_to_ball(q, c);
            if (c * dot(qp, qp) > (1.0 - kBallEps) * (1.0 - kBallEps) + 1e-15)
                r.fail("projection failed to contain point");
        }
    }
    return r;
}

// dist_grad_u against central finite differences (c = 1 closed form),
// pairs constrained to dist > 1e-2.
inline SuiteResult dist_grad_suite(int cases, uint64_t seed) {
    using namespace htgn::manifold;
    htgn::Rng rng(htgn::mix_seed(seed, "dist-grad"));
    SuiteResult r;
    const int d = 3;
    const double h = 1e-6;
    int done = 0;
    while (done < cases && r.pass) {
        Vec u = random_point(d, 0.85, 1.0, rng);
        Vec v = random_point(d, 0.85, 1.0, rng);
        if (dist(u, v, 1.0) <= 1e-2) continue;
        ++done;
        Vec g = dist_grad_u(u, v);
        for (int j = 0; j < d; ++j) {
            Vec up = u, dn = u;
            up[j] += h;
            dn[j] -= h;
            const double fd = (dist(up, v, 1.0) - dist(dn, v, 1.0)) / (2 * h);
            const double rel =
                std::fabs(g[j] - fd) / std::max({std::fabs(g[j]), std::fabs(fd), 1e-6});
            if (rel > 1e-4) {
                std::ostringstream os;
                os << "dist_grad rel err " << rel << " at case " << done;
                r.fail(os.str());
            }
        }
    }
    return r;
}

}  // namespace suites
