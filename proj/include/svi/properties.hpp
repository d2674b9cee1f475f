#pragma once

// Randomised checks of the resolvent / Moreau-Yosida identities on a
// potential. Every entry is the worst violation seen (<= 0 means it held).

#include "svi/convex_analysis.hpp"
#include "svi/rng.hpp"

#include <string>

namespace svi {

struct PropertyViolations {
  std::string potential;
  std::size_t samples = 0;
  double nonexpansive = -kInf;   // |J u - J v| - |u - v|
  double envelope = -kInf;       // |phi_eps - (1/2 |D|^2 + eps phi(J))|
  double envelope_min = -kInf;   // phi_eps(u) - (1/2 |v - u|^2 + eps phi(v)) for v in dom phi
  double chain = -kInf;          // 1/2|D|^2 <= phi_eps <= <D,u> <= |u|^2, worst link
  double monotone = -kInf;       // -<D_eps u / eps - D_eps v / eps, J u - J v>
  double cross = -kInf;          // item 5, rearranged to "<= 0"
  double subgradient = -kInf;    // smooth kinds: |D / eps - grad phi(J)| / (1 + |grad|)
  double interior_bound = -kInf; // -(eps M0 + <D,u> - gamma0 |D|) where M0 is finite

  /// Worst of the inequality checks; subgradient is judged against the Newton tolerance instead.
  double worst() const {
    return std::max({nonexpansive, envelope, envelope_min, chain, monotone, cross, interior_bound});
  }
};

struct PropertyOptions {
  std::size_t samples = 10000;
  double box = 3.0;       // u, v uniform in [-box, box]^n
  double eps_min = 1e-3;  // eps, delta log-uniform in [eps_min, eps_max]
  double eps_max = 1.0;
  double gamma0 = 0.5;
};

/// Runs the suite on `phi` with draws from `stream`. The bound chain and the
/// interior bound are skipped for potentials whose domain misses the origin.
inline PropertyViolations check_resolvent_properties(const ConvexPotential& phi, const RngStream& stream,
                                                     const PropertyOptions& opt = {}) {
  PropertyViolations r;
  r.potential = phi.name();
  r.samples = opt.samples;
  RandomEngine eng(stream);
  const Index n = phi.dimension();
  const bool h4 = phi.satisfies_h4();
  const double m0 = h4 ? origin_ball_bound(phi, opt.gamma0) : kInf;
  const double log_lo = std::log(opt.eps_min), log_hi = std::log(opt.eps_max);
  Vector u(n), v(n), ju(n), jv(n), jud(n), g(n), w(n);
  auto draw = [&](Vector& x) {
    for (Index i = 0; i < n; ++i) x(i) = eng.uniform(-opt.box, opt.box);
  };
  for (std::size_t s = 0; s < opt.samples; ++s) {
    draw(u);
    draw(v);
    const double eps = std::exp(eng.uniform(log_lo, log_hi));
    const double del = std::exp(eng.uniform(log_lo, log_hi));
    phi.resolvent_into(eps, u, ju);
    phi.resolvent_into(eps, v, jv);
    phi.resolvent_into(del, v, jud);
    const Vector du = u - ju, dv = v - jv, dvd = v - jud;

    r.nonexpansive = std::max(r.nonexpansive, (ju - jv).norm() - (u - v).norm());

    const double phi_ju = phi.evaluate(ju);
    const double env = moreau_envelope(phi, eps, u);
    r.envelope = std::max(r.envelope, std::abs(env - (0.5 * du.squaredNorm() + eps * phi_ju)));

    // Competitor in the domain: the resolvent of v.
    const double phi_jv = phi.evaluate(jv);
    r.envelope_min = std::max(r.envelope_min, env - (0.5 * (jv - u).squaredNorm() + eps * phi_jv));

    r.monotone = std::max(r.monotone, -((du - dv) / eps).dot(ju - jv));

    // <(1/del) D_del v - (1/eps) D_eps u, v - u> >= -(1/del + 1/eps) <D_eps u, D_del v>
    const double lhs = (dvd / del - du / eps).dot(v - u);
    const double rhs = -(1.0 / del + 1.0 / eps) * du.dot(dvd);
    r.cross = std::max(r.cross, rhs - lhs);

    if (h4) {
      const double a = 0.5 * du.squaredNorm();
      const double c = du.dot(u);
      const double d = u.squaredNorm();
      r.chain = std::max({r.chain, a - env, env - c, c - d});
      if (m0 < kInf) r.interior_bound = std::max(r.interior_bound, -interior_bound_slack(phi, eps, u, opt.gamma0, m0));
    }
    if (phi.is_smooth()) {
      phi.gradient_into(ju, g);
      r.subgradient = std::max(r.subgradient, (du / eps - g).norm() / (1.0 + g.norm()));
    }
  }
  return r;
}

}  // namespace svi
