#pragma once

#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "jobrec/ingest.hpp"
#include "jobrec/pagerank.hpp"
#include "jobrec/scoring.hpp"

namespace jobrec::testing {

inline Timestamp ts(std::string_view text) {
    const auto t = parse_timestamp(text);
    if (!t) {
        throw std::invalid_argument(fmt::format("bad test timestamp {}", text));
    }
    return *t;
}

inline InteractionEvent event(std::string user, std::string job, SignalKind kind, std::string_view when,
                              std::optional<std::string> query = std::nullopt) {
    return {std::move(user), std::move(job), kind, ts(when), std::move(query)};
}

inline std::string node_name(std::size_t i) { return fmt::format("n{:03}", i); }

/// Random digraph over `n` nodes named n000.. with the given edge density.
/// Edges never end at inactive nodes; corr is uniform in [lo, hi).
inline RecDigraph random_digraph(std::mt19937_64& rng, std::size_t n, double density, double lo, double hi,
                                 double inactive_fraction = 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_real_distribution<double> w(lo, hi);
    std::vector<std::string> ids;
    std::vector<bool> active;
    for (std::size_t i = 0; i < n; ++i) {
        ids.push_back(node_name(i));
        active.push_back(u(rng) >= inactive_fraction);
    }
    std::vector<std::vector<DigraphEdge>> out(n);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t d = 0; d < n; ++d) {
            if (s != d && active[d] && u(rng) < density) {
                DigraphEdge e;
                e.dst = static_cast<JobIndex>(d);
                e.corr = w(rng);
                out[s].push_back(e);
            }
        }
    }
    return RecDigraph(std::move(ids), std::move(active), std::move(out));
}

/// Dense solve of (I - d P^T) x = (1 - d) r over `nodes`, where P holds the
/// positive corr weights row-normalized and rows without positive weight are
/// replaced by the restart distribution r.
inline Eigen::VectorXd dense_pagerank(const RecDigraph& g, const std::vector<JobIndex>& nodes,
                                      const std::vector<double>& restart, double damping) {
    const auto n = static_cast<Eigen::Index>(nodes.size());
    Eigen::VectorXd r(n);
    double total = 0.0;
    for (double x : restart) {
        total += x;
    }
    for (Eigen::Index k = 0; k < n; ++k) {
        r(k) = restart[static_cast<std::size_t>(k)] / total;
    }
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = 0; b < n; ++b) {
            const auto c = g.corr(nodes[static_cast<std::size_t>(a)], nodes[static_cast<std::size_t>(b)]);
            if (c && *c > 0.0) {
                P(a, b) = *c;
            }
        }
        const double row = P.row(a).sum();
        if (row > 0.0) {
            P.row(a) /= row;
        } else {
            P.row(a) = r.transpose();
        }
    }
    const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - damping * P.transpose();
    return A.fullPivLu().solve((1.0 - damping) * r);
}

}  // namespace jobrec::testing
