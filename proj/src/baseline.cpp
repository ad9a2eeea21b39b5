#include "mudecode/baseline.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "mudecode/errors.hpp"

namespace mudecode::baseline {

std::vector<double> window_targets(const ForceTrace& force, const WindowedCounts& layout) {
    if (force.size() == 0) throw ValidationError("window_targets: empty force trace");
    std::vector<double> out(layout.n_windows);
    for (std::size_t w = 0; w < layout.n_windows; ++w) {
        const double lo = layout.window_start(w);
        const double hi = lo + layout.window_len;
        // Sample indices with lo <= t_i < hi.
        const double first = std::ceil((lo - force.start_time) * force.sample_rate - 1e-9);
        const double last = std::ceil((hi - force.start_time) * force.sample_rate - 1e-9) - 1.0;
        const auto i0 = static_cast<std::ptrdiff_t>(std::max(first, 0.0));
        const auto i1 = static_cast<std::ptrdiff_t>(std::min(last, static_cast<double>(force.size()) - 1.0));
        if (i1 >= i0) {
            double acc = 0.0;
            for (auto i = i0; i <= i1; ++i) acc += force.samples[static_cast<std::size_t>(i)];
            out[w] = acc / static_cast<double>(i1 - i0 + 1);
        } else {
            out[w] = resample_linear(force, 1.0, 0.5 * (lo + hi), 1).samples[0];
        }
    }
    return out;
}

LinearModel fit_ols(const WindowedCounts& counts, std::span<const double> target) {
    const auto n = static_cast<Eigen::Index>(counts.n_windows);
    const auto p = static_cast<Eigen::Index>(counts.n_mu);
    if (static_cast<std::size_t>(n) != target.size()) throw ValidationError("fit_ols: target length != window count");
    if (n < p + 1) throw ValidationError("fit_ols: need at least n_mu + 1 windows");
    for (double y : target) {
        if (!std::isfinite(y)) throw ValidationError("fit_ols: non-finite target");
    }

    Eigen::MatrixXd X(n, p);
    for (Eigen::Index w = 0; w < n; ++w) {
        for (Eigen::Index i = 0; i < p; ++i) X(w, i) = counts.at(static_cast<std::size_t>(w), static_cast<std::size_t>(i));
    }
    const Eigen::Map<const Eigen::VectorXd> y(target.data(), n);

    const Eigen::RowVectorXd x_mean = X.colwise().mean();
    const double y_mean = y.mean();
    const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
    const Eigen::VectorXd yc = y.array() - y_mean;

    LinearModel model;
    model.window_len = counts.window_len;
    model.hop = counts.hop;
    model.coefficients.assign(static_cast<std::size_t>(p), 0.0);

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    if (p > 0) {
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Xc);
        // Counts are integers; anything below this relative to the largest
        // pivot is treated as exact collinearity.
        cod.setThreshold(1e-10);
        model.degenerate = cod.rank() == 0;
        model.rank_deficient = cod.rank() < p;
        if (!model.degenerate) beta = cod.solve(yc);
    }
    for (Eigen::Index i = 0; i < p; ++i) model.coefficients[static_cast<std::size_t>(i)] = beta(i);
    model.intercept = y_mean - (p > 0 ? x_mean.dot(beta) : 0.0);
    return model;
}

ForceTrace predict(const LinearModel& model, const WindowedCounts& counts) {
    if (counts.n_mu != model.coefficients.size()) {
        throw ValidationError("predict: model has " + std::to_string(model.coefficients.size()) + " coefficients, data " +
                              std::to_string(counts.n_mu) + " MUs");
    }
    ForceTrace out;
    out.sample_rate = 1.0 / counts.hop;
    out.start_time = 0.5 * counts.window_len;
    out.samples.resize(counts.n_windows);
    for (std::size_t w = 0; w < counts.n_windows; ++w) {
        double acc = model.intercept;
        for (std::size_t i = 0; i < counts.n_mu; ++i) acc += model.coefficients[i] * counts.at(w, i);
        out.samples[w] = acc;
    }
    return out;
}

void write_model(std::ostream& os, const LinearModel& model) {
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    os << "term,mu_id,value\n";
    os << "intercept,," << num(model.intercept) << '\n';
    os << "window_len,," << num(model.window_len) << '\n';
    os << "hop,," << num(model.hop) << '\n';
    for (std::size_t i = 0; i < model.coefficients.size(); ++i) {
        const int id = i < model.mu_ids.size() ? model.mu_ids[i] : static_cast<int>(i);
        os << "coef," << id << ',' << num(model.coefficients[i]) << '\n';
    }
}

void write_model(const std::filesystem::path& path, const LinearModel& model) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw RuntimeFailure("cannot open " + path.string() + " for writing");
    write_model(os, model);
}

LinearModel read_model(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "term,mu_id,value") throw ValidationError("model CSV: bad header");
    LinearModel m;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string term, id, value;
        std::getline(ss, term, ',');
        std::getline(ss, id, ',');
        std::getline(ss, value);
        char* end = nullptr;
        const double v = std::strtod(value.c_str(), &end);
        if (value.empty() || *end != '\0') throw ValidationError("model CSV: bad value in '" + line + "'");
        if (term == "intercept") {
            m.intercept = v;
        } else if (term == "window_len") {
            m.window_len = v;
        } else if (term == "hop") {
            m.hop = v;
        } else if (term == "coef") {
            m.mu_ids.push_back(std::stoi(id));
            m.coefficients.push_back(v);
        } else {
            throw ValidationError("model CSV: unknown term '" + term + "'");
        }
    }
    return m;
}

LinearModel read_model(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot open " + path.string());
    return read_model(is);
}

}  // namespace mudecode::baseline
