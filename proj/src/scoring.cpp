#include "irtp/scoring.hpp"

#include <algorithm>
#include <cmath>

namespace irtp {

PatternEvaluation evaluate_pattern(const ItemGridTable& table, const QuadratureGrid& grid,
                                   ResponsePattern pattern, bool with_scores) {
    const Eigen::Index Q = grid.size();
    PatternEvaluation ev;
    ev.log_conditional.resize(Q);
    table.log_likelihood(pattern, ev.log_conditional);

    // Max-subtraction keeps long tests from underflowing.
    const Eigen::VectorXd lj = ev.log_conditional + grid.log_weights();
    const double mx = lj.maxCoeff();
    ev.post = (lj.array() - mx).exp();
    const double total = ev.post.sum();
    ev.log_marginal = mx + std::log(total);
    ev.post /= total;

    const Eigen::VectorXd& th = grid.nodes();
    ev.eap = ev.post.dot(th);
    const Eigen::ArrayXd dev = th.array() - ev.eap;
    ev.post_var = std::max(0.0, (ev.post.array() * dev.square()).sum());

    if (with_scores) {
        ev.scores.resize(table.params().num_params(), Q);
        table.score_matrix(pattern, ev.scores);
    }
    return ev;
}

PosteriorSummary posterior_summary(ResponsePattern pattern, const ItemParams& params,
                                   const QuadratureGrid& grid) {
    validate_pattern(pattern, params);
    const ItemGridTable table(params, grid.node_span());
    PatternEvaluation ev = evaluate_pattern(table, grid, pattern, false);
    return {ev.eap, ev.post_var, std::move(ev.post)};
}

ParamVector eap_gradient(const PatternEvaluation& ev, const QuadratureGrid& grid) {
    const Eigen::VectorXd coef = (grid.nodes().array() - ev.eap) * ev.post.array();
    return ev.scores * coef;
}

ParamVector postvar_gradient(const PatternEvaluation& ev, const QuadratureGrid& grid) {
    const Eigen::ArrayXd dev = grid.nodes().array() - ev.eap;
    const Eigen::VectorXd coef = (dev.square() - ev.post_var) * ev.post.array();
    return ev.scores * coef;
}

ParamVector eap_gradient(ResponsePattern pattern, const ItemParams& params,
                         const QuadratureGrid& grid) {
    validate_pattern(pattern, params);
    const ItemGridTable table(params, grid.node_span());
    return eap_gradient(evaluate_pattern(table, grid, pattern, true), grid);
}

ParamVector postvar_gradient(ResponsePattern pattern, const ItemParams& params,
                             const QuadratureGrid& grid) {
    validate_pattern(pattern, params);
    const ItemGridTable table(params, grid.node_span());
    return postvar_gradient(evaluate_pattern(table, grid, pattern, true), grid);
}

std::vector<PosteriorSummary> score_responses(const ResponseMatrix& data,
                                              const ItemParams& params,
                                              const QuadratureGrid& grid) {
    data.validate(params);
    const ItemGridTable table(params, grid.node_span());
    std::vector<PosteriorSummary> out;
    out.reserve(data.rows());
    for (std::size_t i = 0; i < data.rows(); ++i) {
        PatternEvaluation ev = evaluate_pattern(table, grid, data.row(i), false);
        out.push_back({ev.eap, ev.post_var, std::move(ev.post)});
    }
    return out;
}

}  // namespace irtp
