#include "statns/transport.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <queue>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "statns/error.hpp"

namespace statns {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

CostMatrix CostMatrix::from_dense(std::size_t r, std::size_t c, std::vector<double> values) {
  if (values.size() != r * c) throw PreconditionError("cost matrix: size mismatch");
  CostMatrix m(r, c);
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (std::isinf(values[k])) {
      m.infinite[k] = 1;
      m.entries[k] = 0.0;
    } else {
      m.entries[k] = values[k];
    }
  }
  return m;
}

CostMatrix build_cost_matrix(const Ensemble& ens1, const Ensemble& ens2, const EosParams& eos,
                             unsigned workers) {
  ens1.validate();
  ens2.validate();
  if (!(ens1.grid == ens2.grid)) throw PreconditionError("cost matrix: ensembles use different grids");
  const BoundaryData& ref = ens1.atoms.front().bd;
  for (const auto* e : {&ens1, &ens2}) {
    for (std::size_t k = 0; k < e->size(); ++k) {
      if (!(e->atoms[k].bd == ref)) {
        throw PreconditionError("cost matrix: boundary data differ (atom " + std::to_string(k) +
                                " of the " + (e == &ens1 ? "first" : "second") + " ensemble)");
      }
    }
  }
  for (std::size_t j = 0; j < ens2.size(); ++j) {
    for (double r : ens2.atoms[j].state.rho) {
      if (!(r > 0.0)) {
        throw DomainError("cost matrix: atom " + std::to_string(j) +
                          " of the second ensemble has nonpositive density");
      }
    }
  }
  CostMatrix m(ens1.size(), ens2.size());
  const std::size_t total = m.rows * m.cols;
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k = next++; k < total; k = next++) {
      const std::size_t i = k / m.cols, j = k % m.cols;
      const auto e = integrated_relative_energy(ens1.atoms[i].state, ens2.atoms[j].state,
                                                ens1.grid, eos);
      if (e.finite) {
        m.entries[k] = e.value;
      } else {
        m.infinite[k] = 1;
      }
    }
  };
  unsigned nw = workers ? workers : std::thread::hardware_concurrency();
  nw = std::max(1u, std::min<unsigned>(nw, static_cast<unsigned>(total)));
  if (nw == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < nw; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return m;
}

double TransportPlan::marginal_violation(const std::vector<double>& a,
                                         const std::vector<double>& b) const {
  double worst = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += at(i, j);
    worst = std::max(worst, std::abs(s - a[i]));
  }
  for (std::size_t j = 0; j < cols; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < rows; ++i) s += at(i, j);
    worst = std::max(worst, std::abs(s - b[j]));
  }
  return worst;
}

namespace {

void check_marginals(const std::vector<double>& a, const std::vector<double>& b,
                     const CostMatrix& cost) {
  if (a.size() != cost.rows || b.size() != cost.cols) {
    throw PreconditionError("transport: marginal sizes do not match the cost matrix");
  }
  double sa = 0.0, sb = 0.0;
  for (double x : a) {
    if (!(x >= 0.0)) throw PreconditionError("transport: negative marginal weight");
    sa += x;
  }
  for (double x : b) {
    if (!(x >= 0.0)) throw PreconditionError("transport: negative marginal weight");
    sb += x;
  }
  if (std::abs(sa - 1.0) > 1e-12 || std::abs(sb - 1.0) > 1e-12) {
    throw PreconditionError("transport: infeasible marginals (weights not normalized)");
  }
}

// Min-cost flow on source -> rows -> columns -> sink.
class FlowNetwork {
 public:
  struct Edge {
    int to;
    double cap;
    double cost;
    int rev;
  };

  explicit FlowNetwork(int n) : adj_(n) {}

  int add(int from, int to, double cap, double cost) {
    adj_[from].push_back({to, cap, cost, static_cast<int>(adj_[to].size())});
    adj_[to].push_back({from, 0.0, -cost, static_cast<int>(adj_[from].size()) - 1});
    return static_cast<int>(adj_[from].size()) - 1;
  }

  const std::vector<Edge>& edges(int v) const { return adj_[v]; }

  // Pushes up to `demand` units from s to t along successive shortest paths. Returns the flow sent.
  double run(int s, int t, double demand, double eps, std::vector<double>& potential) {
    const int n = static_cast<int>(adj_.size());
    potential.assign(n, 0.0);
    // Initial potentials by Bellman-Ford on the (acyclic, nonnegative) forward network.
    bellman_ford(s, potential);
    double sent = 0.0;
    std::vector<double> dist(n);
    std::vector<int> prev_v(n), prev_e(n);
    while (demand - sent > eps) {
      std::fill(dist.begin(), dist.end(), kInf);
      std::fill(prev_v.begin(), prev_v.end(), -1);
      dist[s] = 0.0;
      using Item = std::pair<double, int>;
      std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
      heap.push({0.0, s});
      while (!heap.empty()) {
        auto [d, v] = heap.top();
        heap.pop();
        if (d > dist[v]) continue;
        for (int k = 0; k < static_cast<int>(adj_[v].size()); ++k) {
          const Edge& e = adj_[v][k];
          if (e.cap <= eps) continue;
          const double reduced = std::max(0.0, e.cost + potential[v] - potential[e.to]);
          const double nd = d + reduced;
          if (nd < dist[e.to]) {
            dist[e.to] = nd;
            prev_v[e.to] = v;
            prev_e[e.to] = k;
            heap.push({nd, e.to});
          }
        }
      }
      if (dist[t] == kInf) break;
      for (int v = 0; v < n; ++v) {
        if (dist[v] < kInf) potential[v] += dist[v];
      }
      double push = demand - sent;
      for (int v = t; v != s; v = prev_v[v]) push = std::min(push, adj_[prev_v[v]][prev_e[v]].cap);
      for (int v = t; v != s; v = prev_v[v]) {
        Edge& e = adj_[prev_v[v]][prev_e[v]];
        e.cap -= push;
        adj_[v][e.rev].cap += push;
      }
      sent += push;
    }
    return sent;
  }

 private:
  void bellman_ford(int s, std::vector<double>& dist) {
    const int n = static_cast<int>(adj_.size());
    std::vector<double> d(n, kInf);
    d[s] = 0.0;
    for (int it = 0; it < n; ++it) {
      bool changed = false;
      for (int v = 0; v < n; ++v) {
        if (d[v] == kInf) continue;
        for (const Edge& e : adj_[v]) {
          if (e.cap > 0.0 && d[v] + e.cost < d[e.to]) {
            d[e.to] = d[v] + e.cost;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    for (int v = 0; v < n; ++v) dist[v] = d[v] == kInf ? 0.0 : d[v];
  }

  std::vector<std::vector<Edge>> adj_;
};

}  // namespace

TransportResult we_distance_exact(const std::vector<double>& a, const std::vector<double>& b,
                                  const CostMatrix& cost) {
  check_marginals(a, b, cost);
  const std::size_t n1 = cost.rows, n2 = cost.cols;
  if (n1 * n2 > 10000) throw PreconditionError("we_distance_exact: problem larger than 1e4 entries");
  const int s = 0, t = static_cast<int>(n1 + n2 + 1);
  auto row = [](std::size_t i) { return static_cast<int>(1 + i); };
  auto col = [n1](std::size_t j) { return static_cast<int>(1 + n1 + j); };
  FlowNetwork net(static_cast<int>(n1 + n2 + 2));
  for (std::size_t i = 0; i < n1; ++i) net.add(s, row(i), a[i], 0.0);
  for (std::size_t j = 0; j < n2; ++j) net.add(col(j), t, b[j], 0.0);
  std::vector<std::vector<int>> arc(n1, std::vector<int>(n2, -1));
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n2; ++j) {
      if (cost.is_finite(i, j)) arc[i][j] = net.add(row(i), col(j), kInf, cost.at(i, j));
    }
  }
  std::vector<double> potential;
  const double sent = net.run(s, t, 1.0, 1e-15, potential);

  TransportResult res;
  res.plan.rows = n1;
  res.plan.cols = n2;
  res.plan.coupling.assign(n1 * n2, 0.0);
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n2; ++j) {
      if (arc[i][j] < 0) continue;
      const auto& e = net.edges(row(i))[arc[i][j]];
      const double flow = net.edges(e.to)[e.rev].cap;
      res.plan.coupling[i * n2 + j] = flow;
      res.value += flow * cost.at(i, j);
    }
  }
  if (1.0 - sent > 1e-12) {
    res.finite = false;
    res.value = kInf;
  }
  res.u.resize(n1);
  res.v.resize(n2);
  // Reduced costs c_ij + pi_i - pi_j >= 0 give u_i = -pi_row, v_j = pi_col.
  for (std::size_t i = 0; i < n1; ++i) res.u[i] = -potential[row(i)];
  for (std::size_t j = 0; j < n2; ++j) res.v[j] = potential[col(j)];
  return res;
}

TransportResult we_distance_exact(const Ensemble& ens1, const Ensemble& ens2, const CostMatrix& cost) {
  return we_distance_exact(ens1.weights, ens2.weights, cost);
}

namespace {

double log_sum_exp(const std::vector<double>& v) {
  double m = -kInf;
  for (double x : v) m = std::max(m, x);
  if (m == -kInf) return -kInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

EntropicResult we_distance_entropic(const std::vector<double>& a, const std::vector<double>& b,
                                    const CostMatrix& cost, double epsilon, std::size_t max_iter,
                                    double tolerance) {
  check_marginals(a, b, cost);
  if (!(epsilon > 0.0)) throw PreconditionError("we_distance_entropic: epsilon must be positive");
  const std::size_t n1 = cost.rows, n2 = cost.cols;
  std::vector<double> f(n1, 0.0), g(n2, 0.0), la(n1), lb(n2);
  for (std::size_t i = 0; i < n1; ++i) la[i] = a[i] > 0.0 ? std::log(a[i]) : -kInf;
  for (std::size_t j = 0; j < n2; ++j) lb[j] = b[j] > 0.0 ? std::log(b[j]) : -kInf;
  double cmax = 0.0;
  for (std::size_t k = 0; k < cost.entries.size(); ++k) {
    if (!cost.infinite[k]) cmax = std::max(cmax, std::abs(cost.entries[k]));
  }

  // P_ij = exp((f_i + g_j - C_ij) / eps + log a_i + log b_j)
  double eps = std::max(epsilon, cmax);
  auto logp = [&](std::size_t i, std::size_t j) {
    if (!cost.is_finite(i, j) || a[i] == 0.0 || b[j] == 0.0) return -kInf;
    return (f[i] + g[j] - cost.at(i, j)) / eps + la[i] + lb[j];
  };
  std::vector<double> tmp1(n2), tmp2(n1);
  auto sweep = [&] {
    for (std::size_t i = 0; i < n1; ++i) {
      if (a[i] == 0.0) continue;
      for (std::size_t j = 0; j < n2; ++j) tmp1[j] = logp(i, j);
      const double l = log_sum_exp(tmp1);
      if (l != -kInf) f[i] -= eps * (l - la[i]);
    }
    for (std::size_t j = 0; j < n2; ++j) {
      if (b[j] == 0.0) continue;
      for (std::size_t i = 0; i < n1; ++i) tmp2[i] = logp(i, j);
      const double l = log_sum_exp(tmp2);
      if (l != -kInf) g[j] -= eps * (l - lb[j]);
    }
  };
  auto row_violation = [&] {
    double worst = 0.0;
    for (std::size_t i = 0; i < n1; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n2; ++j) {
        const double l = logp(i, j);
        if (l != -kInf) s += std::exp(l);
      }
      worst = std::max(worst, std::abs(s - a[i]));
    }
    return worst;
  };

  EntropicResult res;
  // Epsilon scaling with warm-started potentials; the last level runs to `tolerance`.
  double violation = kInf;
  while (res.iterations < max_iter) {
    const bool last = eps <= epsilon;
    const double level_tol = last ? tolerance : std::max(tolerance, 1e-3);
    sweep();
    ++res.iterations;
    if (res.iterations % 5 == 0 || res.iterations == max_iter) {
      violation = row_violation();
      if (violation <= level_tol) {
        if (last) break;
        eps = std::max(epsilon, 0.5 * eps);
      }
    }
  }
  if (eps > epsilon) violation = kInf;  // never reached the requested regularization
  res.marginal_violation = violation;
  res.converged = violation <= tolerance;

  // Project the plan onto the transport polytope: scale rows and columns down to their targets,
  // then distribute the remaining mass as a product of the deficits.
  std::vector<double> p(n1 * n2, 0.0);
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n2; ++j) {
      const double l = logp(i, j);
      if (l != -kInf) p[i * n2 + j] = std::exp(l);
    }
  }
  for (std::size_t i = 0; i < n1; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n2; ++j) s += p[i * n2 + j];
    if (s > a[i]) {
      for (std::size_t j = 0; j < n2; ++j) p[i * n2 + j] *= a[i] / s;
    }
  }
  for (std::size_t j = 0; j < n2; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n1; ++i) s += p[i * n2 + j];
    if (s > b[j]) {
      for (std::size_t i = 0; i < n1; ++i) p[i * n2 + j] *= b[j] / s;
    }
  }
  std::vector<double> da(n1), db(n2);
  double total = 0.0;
  for (std::size_t i = 0; i < n1; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n2; ++j) s += p[i * n2 + j];
    da[i] = std::max(0.0, a[i] - s);
    total += da[i];
  }
  for (std::size_t j = 0; j < n2; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n1; ++i) s += p[i * n2 + j];
    db[j] = std::max(0.0, b[j] - s);
  }
  if (total > 0.0) {
    for (std::size_t i = 0; i < n1; ++i) {
      for (std::size_t j = 0; j < n2; ++j) {
        if (cost.is_finite(i, j)) p[i * n2 + j] += da[i] * db[j] / total;
      }
    }
  }
  res.plan.rows = n1;
  res.plan.cols = n2;
  res.plan.coupling = std::move(p);
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n2; ++j) {
      if (cost.is_finite(i, j)) res.value += res.plan.at(i, j) * cost.at(i, j);
    }
  }
  res.entropy_bound = epsilon * std::log(static_cast<double>(n1 * n2));
  return res;
}

std::pair<double, double> asymmetry_report(const Ensemble& ens1, const Ensemble& ens2,
                                           const EosParams& eos) {
  const auto c12 = build_cost_matrix(ens1, ens2, eos);
  const auto c21 = build_cost_matrix(ens2, ens1, eos);
  return {we_distance_exact(ens1, ens2, c12).value, we_distance_exact(ens2, ens1, c21).value};
}

FieldState perturbation_direction(const Grid& grid, int modes, std::uint64_t seed) {
  if (modes < 1) throw PreconditionError("perturbation_direction: modes must be positive");
  std::mt19937_64 rng(seed);
  auto coef = [&] { return 2.0 * uniform01(rng()) - 1.0; };
  std::vector<double> cr(modes), cm(modes);
  double sr = 0.0, sm = 0.0;
  for (int k = 0; k < modes; ++k) {
    cr[k] = coef() / (k + 1);
    cm[k] = coef() / (k + 1);
    sr += std::abs(cr[k]);
    sm += std::abs(cm[k]);
  }
  FieldState d(grid.cell_count());
  for (std::size_t c = 0; c < d.size(); ++c) {
    const Vec2 x = grid.cell_center(c);
    const double sy = grid.dim == 2 ? std::sin(M_PI * x[1] / grid.extents[1]) : 1.0;
    double br = 0.0, bm = 0.0;
    for (int k = 0; k < modes; ++k) {
      br += cr[k] * std::cos((k + 1) * M_PI * x[0] / grid.extents[0]);
      bm += cm[k] * std::sin((k + 1) * M_PI * x[0] / grid.extents[0]) * sy;
    }
    d.rho[c] = 0.5 * br / sr;
    d.mom[c] = {0.5 * bm / sm, 0.0};
  }
  return d;
}

namespace {

double density_l2(const FieldState& a, const FieldState& b, const Grid& grid) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) s += (a.rho[c] - b.rho[c]) * (a.rho[c] - b.rho[c]);
  return std::sqrt(s * grid.cell_volume());
}

std::pair<double, double> band_of(const std::vector<Trajectory>& trajs) {
  double lo = kInf, hi = -kInf;
  auto visit = [&](const FieldState& s) {
    for (double r : s.rho) {
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
  };
  for (const auto& t : trajs) {
    for (const auto& s : t.states) visit(s);
    for (const auto& st : t.steps) visit(st.begin);
  }
  return {lo, hi};
}

Ensemble states_at(const Ensemble& base, const std::vector<Trajectory>& trajs, std::size_t k) {
  Ensemble e;
  e.grid = base.grid;
  e.weights = base.weights;
  for (std::size_t a = 0; a < base.size(); ++a) {
    e.atoms.push_back(DataPoint{trajs[a].states[k], base.atoms[a].bd, 0.0});
  }
  return e;
}

}  // namespace

ContinuityReport continuity_experiment(const Ensemble& nu, const ContinuityConfig& config,
                                       const SolverConfig& cfg) {
  nu.validate();
  if (!(config.band > 1.0)) throw PreconditionError("continuity: band L must exceed 1");
  if (config.output_times.empty()) throw PreconditionError("continuity: no output times");
  for (double t : config.output_times) {
    if (t < 0.0 || t > config.horizon) throw PreconditionError("continuity: output time outside [0, T]");
  }
  const auto& times = config.output_times;
  PropagateOptions opt;
  opt.workers = config.workers;
  opt.atom_dt = resolve_atom_dt(nu, cfg, times);
  const auto base = propagate(nu, times, cfg, opt);

  ContinuityReport rep;
  std::tie(rep.base_rho_min, rep.base_rho_max) = band_of(base);
  const double lo = 1.0 / config.band, hi = config.band;
  if (rep.base_rho_min < lo || rep.base_rho_max > hi) {
    rep.valid = false;
    std::ostringstream msg;
    msg << "base density leaves [" << lo << ", " << hi << "]: realized [" << rep.base_rho_min
        << ", " << rep.base_rho_max << "]";
    rep.diagnostic = msg.str();
    return rep;
  }

  const FieldState dir = perturbation_direction(nu.grid, config.modes, config.seed);
  for (std::size_t n = 0; n < config.deltas.size(); ++n) {
    const double delta = config.deltas[n];
    Ensemble nun = nu;
    for (auto& atom : nun.atoms) {
      for (std::size_t c = 0; c < atom.state.size(); ++c) {
        atom.state.rho[c] *= 1.0 + delta * dir.rho[c];
        atom.state.mom[c][0] += delta * dir.mom[c][0];
        atom.state.mom[c][1] += delta * dir.mom[c][1];
      }
      atom.energy = total_energy(atom.state, atom.bd, nu.grid, cfg.eos).value();
    }
    const auto pert = propagate(nun, times, cfg, opt);
    ContinuityRow row;
    row.n = static_cast<int>(n + 1);
    row.delta = delta;
    std::tie(row.rho_min, row.rho_max) = band_of(pert);
    {
      const auto c0 = build_cost_matrix(nun, nu, cfg.eos, config.workers);
      row.initial_distance = we_distance_exact(nun, nu, c0).value;
    }
    for (std::size_t k = 0; k < times.size(); ++k) {
      const Ensemble at_n = states_at(nun, pert, k);
      const Ensemble at_base = states_at(nu, base, k);
      const auto cost = build_cost_matrix(at_n, at_base, cfg.eos, config.workers);
      const auto ot = we_distance_exact(at_n, at_base, cost);
      row.sup_distance = std::max(row.sup_distance, ot.value);
      double w1 = 0.0;
      for (std::size_t i = 0; i < at_n.size(); ++i) {
        for (std::size_t j = 0; j < at_base.size(); ++j) {
          const double p = ot.plan.at(i, j);
          if (p > 0.0) w1 += p * density_l2(at_n.atoms[i].state, at_base.atoms[j].state, nu.grid);
        }
      }
      row.w1_density = std::max(row.w1_density, w1);
    }
    row.ratio = row.initial_distance > 0.0 ? row.sup_distance / row.initial_distance : 0.0;
    rep.rows.push_back(row);
  }

  std::vector<std::pair<double, double>> pts;
  for (std::size_t k = 0; k < rep.rows.size(); ++k) {
    rep.max_ratio = std::max(rep.max_ratio, rep.rows[k].ratio);
    if (k > 0 && !(rep.rows[k].sup_distance < rep.rows[k - 1].sup_distance)) rep.monotone = false;
    if (rep.rows[k].ratio > 0.0) pts.push_back({static_cast<double>(rep.rows[k].n), std::log(rep.rows[k].ratio)});
  }
  if (pts.size() >= 2) {
    double mx = 0.0, my = 0.0;
    for (auto [x, y] : pts) {
      mx += x;
      my += y;
    }
    mx /= pts.size();
    my /= pts.size();
    double sxy = 0.0, sxx = 0.0;
    for (auto [x, y] : pts) {
      sxy += (x - mx) * (y - my);
      sxx += (x - mx) * (x - mx);
    }
    rep.log_ratio_slope = sxy / sxx;
  }
  return rep;
}

std::string continuity_csv(const ContinuityReport& report) {
  std::string out = "n,delta,w_initial,sup_e,ratio,w1_density,rho_min,rho_max\n";
  char buf[512];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.n, r.delta,
                  r.initial_distance, r.sup_distance, r.ratio, r.w1_density, r.rho_min, r.rho_max);
    out += buf;
  }
  return out;
}

std::string continuity_json(const ContinuityReport& report, const ContinuityConfig& config) {
  nlohmann::ordered_json j;
  j["valid"] = report.valid;
  j["diagnostic"] = report.diagnostic;
  j["band"] = config.band;
  j["horizon"] = config.horizon;
  j["base_rho_min"] = report.base_rho_min;
  j["base_rho_max"] = report.base_rho_max;
  j["max_ratio"] = report.max_ratio;
  j["log_ratio_slope"] = report.log_ratio_slope;
  j["monotone"] = report.monotone;
  j["deltas"] = config.deltas;
  j["seed"] = config.seed;
  j["modes"] = config.modes;
  return j.dump(2) + "\n";
}

}  // namespace statns
