#include "nrrs/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

namespace nrrs {

namespace {

std::string trim(const std::string &s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a])))
        ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1])))
        --b;
    return s.substr(a, b - a);
}

template <typename T>
T parse_integer(const std::string &key, const std::string &value) {
    T out{};
    const char *first = value.data();
    const char *last = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last)
        fail("config: cannot parse '" + value + "' as an integer for key '" + key + "'");
    return out;
}

float parse_float(const std::string &key, const std::string &value) {
    size_t idx = 0;
    float out = 0.0f;
    try {
        out = std::stof(value, &idx);
    } catch (const std::exception &) {
        fail("config: cannot parse '" + value + "' as a number for key '" + key + "'");
    }
    if (idx != value.size())
        fail("config: trailing characters in value '" + value + "' for key '" + key + "'");
    return out;
}

bool parse_bool(const std::string &key, const std::string &value) {
    std::string v;
    for (char c : value)
        v += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (v == "1" || v == "true" || v == "on" || v == "yes")
        return true;
    if (v == "0" || v == "false" || v == "off" || v == "no")
        return false;
    fail("config: cannot parse '" + value + "' as a boolean for key '" + key + "'");
}

std::vector<std::string> split_list(const std::string &spec) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t end = spec.find(',', start);
        if (end == std::string::npos) {
            out.push_back(trim(spec.substr(start)));
            break;
        }
        out.push_back(trim(spec.substr(start, end - start)));
        start = end + 1;
    }
    return out;
}

}  // namespace

void apply_config_entry(RunConfig &cfg, const std::string &key, const std::string &value) {
    if (key == "scene")
        cfg.scene = value;
    else if (key == "strategy")
        cfg.strategy = value;
    else if (key == "max-depth")
        cfg.max_depth = parse_integer<int>(key, value);
    else if (key == "width")
        cfg.width = parse_integer<int>(key, value);
    else if (key == "height")
        cfg.height = parse_integer<int>(key, value);
    else if (key == "seed")
        cfg.seed = parse_integer<uint64_t>(key, value);
    else if (key == "train-iters")
        cfg.train_iters = parse_integer<int>(key, value);
    else if (key == "warmup-fraction")
        cfg.warmup_fraction = parse_float(key, value);
    else if (key == "lr-stat")
        cfg.lr_stat = parse_float(key, value);
    else if (key == "lr-rrs")
        cfg.lr_rrs = parse_float(key, value);
    else if (key == "render-iters")
        cfg.render_iters = parse_integer<int>(key, value);
    else if (key == "ray-cap")
        cfg.ray_cap = parse_integer<uint64_t>(key, value);
    else if (key == "f-rate")
        cfg.f_rate = parse_float(key, value);
    else if (key == "rate-control")
        cfg.rate_control = parse_bool(key, value);
    else if (key == "queue-capacity")
        cfg.queue_capacity = parse_integer<uint32_t>(key, value);
    else if (key == "threads")
        cfg.threads = parse_integer<int>(key, value);
    else if (key == "out-dir")
        cfg.out_dir = value;
    else if (key == "reference")
        cfg.reference = value;
    else if (key == "reference-iters")
        cfg.reference_iters = parse_integer<int>(key, value);
    else if (key == "checkpoint-in")
        cfg.checkpoint_in = value;
    else if (key == "checkpoint-out")
        cfg.checkpoint_out = value;
    else if (key == "deterministic")
        cfg.deterministic = parse_bool(key, value);
    else if (key == "candidates")
        cfg.candidates = value;
    else if (key == "segment-depth")
        cfg.segment_depth = parse_integer<int>(key, value);
    else if (key == "brute-cap")
        cfg.brute_cap = parse_integer<uint64_t>(key, value);
    else if (key == "search-mode")
        cfg.search_mode = value;
    else if (key == "score-time")
        cfg.score_time = parse_bool(key, value);
    else
        fail("config: unknown key '" + key + "'");
}

void load_config_file(RunConfig &cfg, const std::string &path) {
    std::ifstream in(path);
    if (!in)
        fail("config: cannot open " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#')
            continue;
        const size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            fail("config: missing '=' at " + path + ":" + std::to_string(line_no));
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty())
            fail("config: empty key at " + path + ":" + std::to_string(line_no));
        apply_config_entry(cfg, key, value);
    }
}

void validate_config(const RunConfig &cfg) {
    if (cfg.width < 8 || cfg.height < 8)
        fail("config: resolution must be at least 8x8, got " + std::to_string(cfg.width) + "x" +
             std::to_string(cfg.height));
    if (cfg.max_depth < 1)
        fail("config: max-depth must be at least 1");
    if (cfg.train_iters < 1)
        fail("config: the training budget must be positive");
    if (cfg.render_iters < 1 && cfg.ray_cap == 0)
        fail("config: the rendering budget must be positive (iterations or a ray cap)");
    if (cfg.render_iters < 0)
        fail("config: render-iters must not be negative");
    if (!(cfg.warmup_fraction >= 0.0f && cfg.warmup_fraction <= 1.0f))
        fail("config: warmup-fraction must lie in [0, 1]");
    if (!(cfg.lr_stat > 0.0f && std::isfinite(cfg.lr_stat)))
        fail("config: lr-stat must be positive and finite");
    if (!(cfg.lr_rrs > 0.0f && std::isfinite(cfg.lr_rrs)))
        fail("config: lr-rrs must be positive and finite");
    if (!(cfg.f_rate > 0.0f && cfg.f_rate <= 1.0f))
        fail("config: f-rate must lie in (0, 1]");
    if (cfg.reference_iters < 1)
        fail("config: reference-iters must be positive");
    if (cfg.threads < 0)
        fail("config: threads must not be negative");
    if (cfg.segment_depth < 1)
        fail("config: segment-depth must be at least 1");
    if (cfg.brute_cap < 1)
        fail("config: brute-cap must be at least 1");
    if (cfg.search_mode != "auto" && cfg.search_mode != "brute" && cfg.search_mode != "heuristic")
        fail("config: search-mode must be auto, brute, or heuristic");
}

DepthAssignment parse_assignment_spec(const std::string &spec, int max_depth) {
    if (max_depth < 1)
        fail("assignment spec: max_depth must be at least 1");
    std::vector<std::string> tokens = split_list(spec);
    DepthAssignment out;
    if (tokens.size() == 1) {
        out.assign(static_cast<size_t>(max_depth), parse_strategy(tokens[0]));
    } else if (tokens.size() == static_cast<size_t>(max_depth)) {
        out.reserve(tokens.size());
        for (const auto &t : tokens)
            out.push_back(parse_strategy(t));
    } else {
        fail("assignment spec '" + spec + "' has " + std::to_string(tokens.size()) +
             " entries but max depth is " + std::to_string(max_depth) +
             "; give one strategy or one per depth");
    }
    return out;
}

std::string sanitize_method_name(const std::string &spec) {
    std::string out;
    out.reserve(spec.size());
    for (char c : spec) {
        const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-';
        out += keep ? c : '_';
    }
    return out;
}

}  // namespace nrrs
