#include "nrrs/rrs.hpp"

#include <cmath>
#include <sstream>

namespace nrrs {

double normalize_factors(std::span<float> q, uint64_t n_pixels) {
    double sum = 0.0;
    for (const float v : q) {
        if (!(v >= 0.0f) || !std::isfinite(v))
            fail("normalize_factors: factors must be finite and >= 0");
        sum += v;
    }
    if (sum <= 0.0)
        return 1.0;
    const double f_norm = static_cast<double>(n_pixels) / sum;
    if (f_norm < 1.0) {
        const float s = static_cast<float>(f_norm);
        for (float &v : q)
            v *= s;
    }
    return f_norm;
}

double bernstein_bound(double f_rate, uint64_t n_pixels) {
    if (f_rate >= 1.0)
        return 1.0;
    const double gap = 1.0 - f_rate;
    const double exponent = gap * gap * static_cast<double>(n_pixels) /
                            (2.0 * f_rate + (2.0 / 3.0) * gap);
    return std::exp(-exponent);
}

uint64_t realize_counts(std::span<const float> q, std::span<const float> u,
                        std::span<int> counts) {
    if (q.size() != u.size() || q.size() != counts.size())
        fail("realize_counts: size mismatch");
    uint64_t total = 0;
    for (size_t i = 0; i < q.size(); ++i) {
        counts[i] = stochastic_round(q[i], u[i]);
        total += static_cast<uint64_t>(counts[i]);
    }
    return total;
}

Strategy parse_strategy(const std::string &name) {
    Strategy s;
    if (name.rfind("fixed", 0) == 0) {
        s.kind = StrategyKind::Fixed;
        const size_t colon = name.find(':');
        s.fixed_value = colon == std::string::npos ? 1.0f : std::stof(name.substr(colon + 1));
        if (!(s.fixed_value >= 0.0f))
            fail("parse_strategy: fixed value must be >= 0");
        return s;
    }
    if (name == "pt") {
        s.kind = StrategyKind::Fixed;
        s.fixed_value = 1.0f;
        return s;
    }
    if (name == "throughput") {
        s.kind = StrategyKind::Throughput;
        return s;
    }
    if (name == "adrrs-tree") {
        s.kind = StrategyKind::AdrrsTree;
        return s;
    }
    if (name == "adrrs-nn") {
        s.kind = StrategyKind::AdrrsNn;
        return s;
    }
    if (name == "nrrs") {
        s.kind = StrategyKind::Nrrs;
        return s;
    }
    if (name == "aid-nrrs") {
        s.kind = StrategyKind::AidNrrs;
        return s;
    }
    fail("parse_strategy: unknown strategy '" + name + "'");
}

std::string strategy_name(const Strategy &s) {
    switch (s.kind) {
    case StrategyKind::Fixed: {
        std::ostringstream os;
        os << "fixed:" << s.fixed_value;
        return os.str();
    }
    case StrategyKind::Throughput:
        return "throughput";
    case StrategyKind::AdrrsTree:
        return "adrrs-tree";
    case StrategyKind::AdrrsNn:
        return "adrrs-nn";
    case StrategyKind::Nrrs:
        return "nrrs";
    case StrategyKind::AidNrrs:
        return "aid-nrrs";
    }
    return "unknown";
}

DepthAssignment uniform_assignment(const Strategy &s, int max_depth) {
    return DepthAssignment(static_cast<size_t>(max_depth), s);
}

DepthAssignment parse_assignment(const std::string &spec, int max_depth) {
    if (spec.find(',') == std::string::npos)
        return uniform_assignment(parse_strategy(spec), max_depth);
    DepthAssignment a;
    std::istringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ','))
        a.push_back(parse_strategy(tok));
    if (static_cast<int>(a.size()) != max_depth)
        fail("parse_assignment: expected " + std::to_string(max_depth) + " entries");
    return a;
}

std::string assignment_name(const DepthAssignment &a) {
    std::string out;
    for (size_t i = 0; i < a.size(); ++i) {
        if (i)
            out += ',';
        out += strategy_name(a[i]);
    }
    return out;
}

} // namespace nrrs
