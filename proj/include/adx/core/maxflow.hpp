#pragma once

// Dinic max-flow on double capacities.
//
// Arc saturation is exact: an augmentation's bottleneck arc gets flow == cap,
// so saturation tests and per-node balance checks are reliable to float-sum
// roundoff. Graphs here are tiny bipartite layouts (subsets/types vs
// advertisers), so no capacity scaling is needed.

#include <limits>
#include <queue>
#include <vector>

namespace adx {

class MaxFlow {
public:
    explicit MaxFlow(int nodes) : head_(nodes, -1), level_(nodes), iter_(nodes) {}

    int add_node() {
        head_.push_back(-1);
        level_.push_back(0);
        iter_.push_back(-1);
        return static_cast<int>(head_.size()) - 1;
    }

    // Returns the arc id; use flow(id) after run().
    int add_edge(int u, int v, double cap) {
        int id = static_cast<int>(arcs_.size());
        arcs_.push_back({v, head_[u], cap, 0.0});
        head_[u] = id;
        arcs_.push_back({u, head_[v], 0.0, 0.0});
        head_[v] = id + 1;
        return id;
    }

    double capacity(int id) const { return arcs_[id].cap; }
    double flow(int id) const { return arcs_[id].flow; }
    double residual(int id) const { return arcs_[id].cap - arcs_[id].flow; }

    double run(int s, int t) {
        double total = 0.0;
        while (bfs(s, t)) {
            for (std::size_t i = 0; i < iter_.size(); ++i) iter_[i] = head_[i];
            while (true) {
                double pushed = dfs(s, t, std::numeric_limits<double>::infinity());
                if (pushed <= 0.0) break;
                total += pushed;
            }
        }
        return total;
    }

    // After run(): true for nodes reachable from s in the residual graph
    // (the s-side of a minimum cut).
    std::vector<char> min_cut_side(int s) const {
        std::vector<char> side(head_.size(), 0);
        std::queue<int> q;
        q.push(s);
        side[s] = 1;
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            for (int e = head_[u]; e != -1; e = arcs_[e].next) {
                if (arcs_[e].cap - arcs_[e].flow > kEps && !side[arcs_[e].to]) {
                    side[arcs_[e].to] = 1;
                    q.push(arcs_[e].to);
                }
            }
        }
        return side;
    }

private:
    static constexpr double kEps = 1e-12;

    struct Arc {
        int to;
        int next;
        double cap;
        double flow;
    };

    bool bfs(int s, int t) {
        std::fill(level_.begin(), level_.end(), -1);
        std::queue<int> q;
        level_[s] = 0;
        q.push(s);
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            for (int e = head_[u]; e != -1; e = arcs_[e].next) {
                if (arcs_[e].cap - arcs_[e].flow > kEps && level_[arcs_[e].to] < 0) {
                    level_[arcs_[e].to] = level_[u] + 1;
                    q.push(arcs_[e].to);
                }
            }
        }
        return level_[t] >= 0;
    }

    double dfs(int u, int t, double limit) {
        if (u == t) return limit;
        for (int& e = iter_[u]; e != -1; e = arcs_[e].next) {
            Arc& a = arcs_[e];
            double res = a.cap - a.flow;
            if (res > kEps && level_[a.to] == level_[u] + 1) {
                double pushed = dfs(a.to, t, std::min(limit, res));
                if (pushed > 0.0) {
                    // Saturate exactly when the bottleneck is this arc.
                    if (pushed >= res)
                        a.flow = a.cap;
                    else
                        a.flow += pushed;
                    arcs_[e ^ 1].flow -= pushed;
                    return pushed;
                }
            }
        }
        return 0.0;
    }

    std::vector<int> head_;
    std::vector<int> level_;
    std::vector<int> iter_;
    std::vector<Arc> arcs_;
};

} // namespace adx
