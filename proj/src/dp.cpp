#include "dualsource/dp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace dualsource::dp {

StateSpace StateSpace::defaults(const CostParams& p, const DemandModel& model) {
  const std::int64_t d_max = model.max_demand();
  const int l = p.gap();
  StateSpace s;
  s.l = l;
  s.lo = -(l + 1) * d_max - 5;
  s.hi = (l + 2) * d_max + 5;
  s.q_max = d_max;
  // Without demand, stock above zero never drains and a padded grid is
  // multichain; the origin alone is the reachable set.
  if (d_max == 0) s.lo = s.hi = 0;
  return s;
}

void StateSpace::validate() const {
  if (l < 1) throw DpError("state space requires l >= 1");
  if (!(lo <= 0 && 0 <= hi)) throw DpError("state space bounds must satisfy lo <= 0 <= hi");
  if (q_max < 0) throw DpError("q_max must be >= 0");
}

std::size_t StateSpace::tail_size() const {
  std::size_t n = 1;
  for (int i = 0; i < l - 1; ++i) n *= static_cast<std::size_t>(q_max + 1);
  return n;
}

std::size_t StateSpace::size() const { return static_cast<std::size_t>(hi - lo + 1) * tail_size(); }

bool StateSpace::contains(const CompressedState& s) const {
  if (s.tail.size() != static_cast<std::size_t>(l - 1)) return false;
  if (s.I_e != std::floor(s.I_e) || s.I_e < static_cast<double>(lo) || s.I_e > static_cast<double>(hi))
    return false;
  return std::all_of(s.tail.begin(), s.tail.end(), [&](auto q) { return q >= 0 && q <= q_max; });
}

std::size_t StateSpace::index(const CompressedState& s) const {
  if (!contains(s)) throw DpError("state " + to_string(s) + " lies outside the state space");
  std::size_t idx = static_cast<std::size_t>(static_cast<std::int64_t>(s.I_e) - lo);
  for (auto q : s.tail) idx = idx * static_cast<std::size_t>(q_max + 1) + static_cast<std::size_t>(q);
  return idx;
}

CompressedState StateSpace::state(std::size_t index) const {
  CompressedState s;
  s.tail.assign(static_cast<std::size_t>(l - 1), 0);
  const auto radix = static_cast<std::size_t>(q_max + 1);
  for (int i = l - 2; i >= 0; --i) {
    s.tail[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(index % radix);
    index /= radix;
  }
  s.I_e = static_cast<double>(lo + static_cast<std::int64_t>(index));
  return s;
}

PolicyTable tabulate(const StateSpace& space,
                     const std::function<Action(const CompressedState&)>& rule) {
  space.validate();
  PolicyTable t{space, {}};
  t.actions.resize(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) t.actions[i] = rule(space.state(i));
  return t;
}

namespace {

void require_reduced(const CostParams& p, const DemandModel& model) {
  p.validate();
  if (p.single_source) throw DpError("DP requires a dual-sourcing configuration");
  if (p.l_e != 0) throw DpError("DP requires the reduction l_e = 0");
  if (p.c_r != 0.0) throw DpError("DP requires the reduction c_r = 0");
  if (!model.is_discrete()) throw DpError("DP requires discrete demand with finite support");
}

// Successor of state index `s` under an action for one demand value. Returns
// nullopt when the successor leaves [lo, hi].
struct Successor {
  std::size_t index;
  bool escaped;
};

Successor successor(const StateSpace& space, const CompressedState& s, Action a, std::int64_t d) {
  const std::int64_t incoming = s.tail.empty() ? a.q_r : s.tail.front();
  std::int64_t next_ie = static_cast<std::int64_t>(s.I_e) + a.q_e - d + incoming;
  bool escaped = false;
  if (next_ie < space.lo) {
    next_ie = space.lo;
    escaped = true;
  } else if (next_ie > space.hi) {
    next_ie = space.hi;
    escaped = true;
  }
  const auto radix = static_cast<std::size_t>(space.q_max + 1);
  std::size_t idx = static_cast<std::size_t>(next_ie - space.lo);
  for (std::size_t i = 1; i < s.tail.size(); ++i)
    idx = idx * radix + static_cast<std::size_t>(s.tail[i]);
  if (!s.tail.empty()) idx = idx * radix + static_cast<std::size_t>(a.q_r);
  return {idx, escaped};
}

}  // namespace

ValueIterationResult value_iteration(const CostParams& p, const DemandModel& model,
                                     const StateSpace& space, const ValueIterationOptions& opts) {
  require_reduced(p, model);
  space.validate();
  if (space.l != p.gap()) throw DpError("state space gap does not match l_r - l_e");
  if (space.q_max < model.max_demand()) throw DpError("q_max must be >= D_max");
  if (!(opts.gamma > 0.0 && opts.gamma <= 1.0)) throw DpError("gamma must lie in (0, 1]");

  const auto pmf = model.pmf();
  const std::size_t n = space.size();
  const auto n_q = static_cast<std::size_t>(space.q_max + 1);
  const std::size_t n_actions = n_q * n_q;
  const std::size_t n_d = pmf.size();

  // Action index a = q_e * n_q + q_r, so scanning ascending a realizes the
  // tie-break: smallest q_e first, then smallest q_r.
  std::vector<double> immediate(n * n_actions);
  std::vector<std::uint32_t> next(n * n_actions * n_d);
  for (std::size_t s = 0; s < n; ++s) {
    const CompressedState st = space.state(s);
    for (std::size_t a = 0; a < n_actions; ++a) {
      const Action act{static_cast<std::int64_t>(a % n_q), static_cast<std::int64_t>(a / n_q)};
      double c = order_cost(act, p);
      for (std::size_t k = 0; k < n_d; ++k) {
        const auto [d, prob] = pmf[k];
        const double after = st.I_e + static_cast<double>(act.q_e - d);
        const Successor nx = successor(space, st, act, d);
        c += prob * (p.inventory_cost(after) + (nx.escaped ? opts.escape_penalty : 0.0));
        next[(s * n_actions + a) * n_d + k] = static_cast<std::uint32_t>(nx.index);
      }
      immediate[s * n_actions + a] = c;
    }
  }

  std::vector<double> probs(n_d);
  for (std::size_t k = 0; k < n_d; ++k) probs[k] = pmf[k].second;

  ValueIterationResult out;
  out.policy.space = space;
  out.policy.actions.assign(n, Action{});
  std::vector<double> J(n, 0.0), J_next(n, 0.0), diff(n, 0.0);
  std::vector<std::size_t> argmin(n, 0);
  const std::size_t ref = space.zero_index();

  std::size_t k = 0;
  bool converged = false;
  while (k < opts.max_iterations) {
    for (std::size_t s = 0; s < n; ++s) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_a = 0;
      const std::size_t base = s * n_actions;
      for (std::size_t a = 0; a < n_actions; ++a) {
        const std::uint32_t* nx = &next[(base + a) * n_d];
        double future = 0.0;
        for (std::size_t j = 0; j < n_d; ++j) future += probs[j] * J[nx[j]];
        const double v = immediate[base + a] + opts.gamma * future;
        if (a == 0 || v < best - 1e-13 * std::max(1.0, std::abs(best))) {
          best = v;
          best_a = a;
        }
      }
      J_next[s] = best;
      argmin[s] = best_a;
    }
    ++k;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t s = 0; s < n; ++s) {
      diff[s] = J_next[s] - J[s];
      lo = std::min(lo, diff[s]);
      hi = std::max(hi, diff[s]);
    }
    std::swap(J, J_next);
    const double criterion = (opts.gamma < 1.0)
                                 ? std::max(std::abs(lo), std::abs(hi))
                                 : hi - lo;
    out.lambda_lo = lo;
    out.lambda_hi = hi;
    if (k > 1 && criterion < opts.eps) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw DpError("value iteration did not converge within " + std::to_string(opts.max_iterations) +
                  " iterations");

  for (std::size_t s = 0; s < n; ++s) {
    out.policy.actions[s] = Action{static_cast<std::int64_t>(argmin[s] % n_q),
                                   static_cast<std::int64_t>(argmin[s] / n_q)};
  }
  out.values.J = J;
  out.values.increment = diff;
  out.values.lambda.resize(n);
  for (std::size_t s = 0; s < n; ++s) out.values.lambda[s] = J[s] / static_cast<double>(k);
  out.values.iterations = k;
  out.lambda_star = (opts.gamma < 1.0) ? (1.0 - opts.gamma) * J[ref]
                                       : 0.5 * (out.lambda_lo + out.lambda_hi);
  return out;
}

namespace {

struct Graph {
  std::vector<std::size_t> nodes;                 // space indices
  std::map<std::size_t, std::size_t> local;       // space index -> node position
  std::vector<std::vector<std::pair<std::size_t, double>>> edges;  // node -> (node, prob)
};

Graph reachable_graph(const PolicyTable& policy, const CostParams& p, const DemandModel& model) {
  require_reduced(p, model);
  const auto& space = policy.space;
  const auto pmf = model.pmf();
  Graph g;
  std::vector<std::size_t> stack{space.zero_index()};
  g.local[space.zero_index()] = 0;
  g.nodes.push_back(space.zero_index());
  g.edges.emplace_back();
  while (!stack.empty()) {
    const std::size_t s = stack.back();
    stack.pop_back();
    const std::size_t u = g.local.at(s);
    const CompressedState st = space.state(s);
    const Action a = policy.actions.at(s);
    if (a.q_r < 0 || a.q_e < 0 || a.q_r > space.q_max)
      throw DpError("policy action outside the order domain at " + to_string(st));
    std::map<std::size_t, double> out;
    for (const auto& [d, prob] : pmf) {
      if (prob == 0.0) continue;
      const Successor nx = successor(space, st, a, d);
      if (nx.escaped)
        throw DpError("policy drives the state outside the bounds from " + to_string(st) +
                      "; long-run cost diverges");
      out[nx.index] += prob;
    }
    for (const auto& [t, prob] : out) {
      auto [it, inserted] = g.local.emplace(t, g.nodes.size());
      if (inserted) {
        g.nodes.push_back(t);
        g.edges.emplace_back();
        stack.push_back(t);
      }
      g.edges[u].emplace_back(it->second, prob);
    }
  }
  return g;
}

// Tarjan's strongly connected components, iterative.
std::vector<std::vector<std::size_t>> sccs(const Graph& g) {
  const std::size_t n = g.nodes.size();
  constexpr std::size_t unset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> index(n, unset), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::vector<std::size_t>> out;
  std::size_t counter = 0;
  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != unset) continue;
    std::vector<std::pair<std::size_t, std::size_t>> call{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      auto& [v, i] = call.back();
      if (i < g.edges[v].size()) {
        const std::size_t w = g.edges[v][i++].first;
        if (index[w] == unset) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          call.emplace_back(w, 0);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
      } else {
        const std::size_t done = v;
        call.pop_back();
        if (!call.empty()) low[call.back().first] = std::min(low[call.back().first], low[done]);
        if (low[done] == index[done]) {
          std::vector<std::size_t> comp;
          std::size_t w;
          do {
            w = stack.back();
            stack.pop_back();
            on_stack[w] = false;
            comp.push_back(w);
          } while (w != done);
          out.push_back(std::move(comp));
        }
      }
    }
  }
  return out;
}

}  // namespace

std::vector<std::vector<std::size_t>> recurrent_classes(const PolicyTable& policy,
                                                        const CostParams& p,
                                                        const DemandModel& model) {
  const Graph g = reachable_graph(policy, p, model);
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> comp_of(g.nodes.size());
  const auto comps = sccs(g);
  for (std::size_t c = 0; c < comps.size(); ++c)
    for (auto v : comps[c]) comp_of[v] = c;
  for (std::size_t c = 0; c < comps.size(); ++c) {
    bool closed = true;
    for (auto v : comps[c])
      for (const auto& [w, prob] : g.edges[v])
        if (comp_of[w] != c) closed = false;
    if (!closed) continue;
    std::vector<std::size_t> cls;
    for (auto v : comps[c]) cls.push_back(g.nodes[v]);
    std::sort(cls.begin(), cls.end());
    out.push_back(std::move(cls));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> recurrent_states(const PolicyTable& policy, const CostParams& p,
                                          const DemandModel& model) {
  std::vector<std::size_t> all;
  for (const auto& c : recurrent_classes(policy, p, model)) all.insert(all.end(), c.begin(), c.end());
  std::sort(all.begin(), all.end());
  return all;
}

StationaryResult policy_long_run_cost(const PolicyTable& policy, const CostParams& p,
                                      const DemandModel& model) {
  const auto classes = recurrent_classes(policy, p, model);
  if (classes.size() != 1)
    throw DpError("policy induces " + std::to_string(classes.size()) +
                  " recurrent classes; long-run cost depends on the initial state");
  const auto& cls = classes.front();
  const std::size_t m = cls.size();
  std::map<std::size_t, std::size_t> pos;
  for (std::size_t i = 0; i < m; ++i) pos[cls[i]] = i;

  const auto pmf = model.pmf();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m + 1), static_cast<Eigen::Index>(m));
  Eigen::VectorXd cost(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    const CompressedState st = policy.space.state(cls[i]);
    const Action a = policy.actions[cls[i]];
    double c = order_cost(a, p);
    for (const auto& [d, prob] : pmf) {
      c += prob * p.inventory_cost(st.I_e + static_cast<double>(a.q_e - d));
      const Successor nx = successor(policy.space, st, a, d);
      // Balance: pi_j = sum_i pi_i P_ij  ->  (P^T - I) pi = 0.
      A(static_cast<Eigen::Index>(pos.at(nx.index)), static_cast<Eigen::Index>(i)) += prob;
    }
    A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) -= 1.0;
    cost(static_cast<Eigen::Index>(i)) = c;
  }
  A.row(static_cast<Eigen::Index>(m)).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m + 1));
  rhs(static_cast<Eigen::Index>(m)) = 1.0;
  const Eigen::VectorXd pi = A.colPivHouseholderQr().solve(rhs);

  StationaryResult r;
  r.states = cls;
  r.probability.assign(pi.data(), pi.data() + pi.size());
  r.cost = pi.dot(cost);
  return r;
}

void write_policy_csv(std::ostream& out, const PolicyTable& policy, const ValueTable* values) {
  const auto& sp = policy.space;
  out << "I_e";
  for (int i = 1; i < sp.l; ++i) out << ",tail_" << i;
  out << ",q_r,q_e";
  if (values) out << ",J,lambda";
  out << '\n';
  out.precision(17);
  for (std::size_t s = 0; s < sp.size(); ++s) {
    const auto st = sp.state(s);
    out << static_cast<std::int64_t>(st.I_e);
    for (auto q : st.tail) out << ',' << q;
    out << ',' << policy.actions[s].q_r << ',' << policy.actions[s].q_e;
    if (values) out << ',' << values->J[s] << ',' << values->lambda[s];
    out << '\n';
  }
}

}  // namespace dualsource::dp
