#include "dcp/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dcp/errors.hpp"

namespace dcp {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string strip_comment(const std::string& line) {
    const size_t pos = line.find_first_of("#;");
    return pos == std::string::npos ? line : line.substr(0, pos);
}

[[noreturn]] void bad_value(const std::string& path, const std::string& value) {
    throw parameter_error("invalid value for " + path + ": '" + value + "'");
}

double parse_double(const std::string& path, const std::string& value) {
    double x = 0.0;
    size_t used = 0;
    try {
        x = std::stod(value, &used);
    } catch (const std::logic_error&) {
        bad_value(path, value);
    }
    if (used != value.size()) bad_value(path, value);
    return x;
}

long parse_long(const std::string& path, const std::string& value) {
    long x = 0;
    size_t used = 0;
    try {
        x = std::stol(value, &used);
    } catch (const std::logic_error&) {
        bad_value(path, value);
    }
    if (used != value.size()) bad_value(path, value);
    return x;
}

int parse_int(const std::string& path, const std::string& value) {
    const long x = parse_long(path, value);
    if (x < -2147483647L || x > 2147483647L) bad_value(path, value);
    return static_cast<int>(x);
}

std::uint64_t parse_u64(const std::string& path, const std::string& value) {
    unsigned long long x = 0;
    size_t used = 0;
    try {
        x = std::stoull(value, &used);
    } catch (const std::logic_error&) {
        bad_value(path, value);
    }
    if (used != value.size() || value.find('-') != std::string::npos) bad_value(path, value);
    return static_cast<std::uint64_t>(x);
}

bool parse_bool(const std::string& path, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    bad_value(path, value);
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> items;
    std::string cur;
    std::stringstream ss(value);
    while (std::getline(ss, cur, ',')) {
        cur = trim(cur);
        if (!cur.empty()) items.push_back(cur);
    }
    return items;
}

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void apply_key(ExperimentConfig& c, const std::string& section, const std::string& key,
               const std::string& value) {
    const std::string path = section + "." + key;
    if (section == "experiment") {
        if (key == "kind") {
            c.kind = experiment_kind_from_string(value);
            return;
        }
    } else if (section == "dcp") {
        if (key == "sigma") { c.dcp.sigma = parse_double(path, value); return; }
        if (key == "theta") { c.dcp.theta = parse_double(path, value); return; }
        if (key == "alpha") { c.dcp.alpha = parse_double(path, value); return; }
        if (key == "p") { c.dcp.p = parse_double(path, value); return; }
        if (key == "cost_family") {
            if (value != "exponential" && value != "reciprocal") bad_value(path, value);
            c.dcp.cost_family = value;
            return;
        }
        if (key == "cost_beta") { c.dcp.cost_beta = parse_double(path, value); return; }
    } else if (section == "shooting") {
        if (key == "h") { c.shooting.h = parse_double(path, value); return; }
        if (key == "x_max") { c.shooting.x_max = parse_double(path, value); return; }
        if (key == "r_tolerance") { c.shooting.r_tolerance = parse_double(path, value); return; }
        if (key == "w_zero_tolerance") {
            c.shooting.w_zero_tolerance = parse_double(path, value);
            return;
        }
        if (key == "delta") { c.shooting.delta = parse_double(path, value); return; }
        if (key == "max_bisection_iters") {
            c.shooting.max_bisection_iters = parse_int(path, value);
            return;
        }
    } else if (section == "mc") {
        if (key == "dt") { c.mc.dt = parse_double(path, value); return; }
        if (key == "horizon") { c.mc.horizon = parse_double(path, value); return; }
        if (key == "x0") { c.mc.x0 = parse_double(path, value); return; }
        if (key == "n_paths") { c.mc.n_paths = parse_long(path, value); return; }
        if (key == "seed") { c.mc.seed = parse_u64(path, value); return; }
        if (key == "workers") { c.mc.workers = parse_int(path, value); return; }
        if (key == "budget") { c.mc.budget = parse_double(path, value); return; }
    } else if (section == "queue") {
        if (key == "n_list") {
            c.queue.n_list.clear();
            for (const auto& item : split_list(value)) {
                c.queue.n_list.push_back(parse_long(path, item));
            }
            return;
        }
        if (key == "epsilon0") { c.queue.epsilon0 = parse_double(path, value); return; }
        if (key == "patience_slope") {
            c.queue.patience_slope = parse_double(path, value);
            return;
        }
        if (key == "patience_infinite") {
            c.queue.patience_infinite = parse_bool(path, value);
            return;
        }
        if (key == "service") {
            if (value != "deterministic" && value != "gamma") bad_value(path, value);
            c.queue.service = value;
            return;
        }
        if (key == "service_variance") {
            c.queue.service_variance = parse_double(path, value);
            return;
        }
        if (key == "n_paths") { c.queue.n_paths = parse_long(path, value); return; }
        if (key == "x0_hat") { c.queue.x0_hat = parse_double(path, value); return; }
        if (key == "budget") { c.queue.budget = parse_double(path, value); return; }
    } else if (section == "sweep") {
        if (key == "r_values") {
            c.sweep.r_values.clear();
            for (const auto& item : split_list(value)) {
                c.sweep.r_values.push_back(parse_double(path, item));
            }
            return;
        }
        if (key == "count") { c.sweep.count = parse_int(path, value); return; }
    } else if (section == "output") {
        if (key == "dir") { c.output.dir = value; return; }
        if (key == "format") {
            if (value != "csv") bad_value(path, value);
            c.output.format = value;
            return;
        }
    } else {
        throw parameter_error("unknown config section: " + section);
    }
    throw parameter_error("unknown config key: " + path);
}

}  // namespace

const char* to_string(experiment_kind kind) {
    switch (kind) {
        case experiment_kind::sweep_wr: return "sweep_wr";
        case experiment_kind::solve: return "solve";
        case experiment_kind::verify_dcp: return "verify_dcp";
        case experiment_kind::converge_qcp: return "converge_qcp";
        case experiment_kind::conjugate_table: return "conjugate_table";
    }
    return "solve";
}

experiment_kind experiment_kind_from_string(const std::string& name) {
    if (name == "sweep_wr") return experiment_kind::sweep_wr;
    if (name == "solve") return experiment_kind::solve;
    if (name == "verify_dcp") return experiment_kind::verify_dcp;
    if (name == "converge_qcp") return experiment_kind::converge_qcp;
    if (name == "conjugate_table") return experiment_kind::conjugate_table;
    throw parameter_error("invalid value for experiment.kind: '" + name + "'");
}

CostFunction build_cost(const DcpBlock& dcp) {
    if (dcp.cost_family == "exponential") return make_exponential_cost(dcp.cost_beta);
    if (dcp.cost_family == "reciprocal") return make_reciprocal_cost();
    throw parameter_error("invalid value for dcp.cost_family: '" + dcp.cost_family + "'");
}

DcpParams to_dcp_params(const ExperimentConfig& config) {
    DcpParams params;
    params.sigma = config.dcp.sigma;
    params.theta = config.dcp.theta;
    params.alpha = config.dcp.alpha;
    params.p = config.dcp.p;
    params.cost = build_cost(config.dcp);
    return params;
}

void ExperimentConfig::validate() const {
    const DcpParams params = to_dcp_params(*this);
    params.validate();
    shooting.validate(params);
    if (!(mc.dt > 0.0) || !std::isfinite(mc.dt)) {
        throw parameter_error("mc.dt must be positive and finite");
    }
    if (!(mc.horizon > 0.0) || !std::isfinite(mc.horizon)) {
        throw parameter_error("mc.horizon must be positive and finite");
    }
    if (!std::isfinite(mc.x0) || mc.x0 < 0.0) {
        throw parameter_error("mc.x0 must be nonnegative and finite");
    }
    if (mc.n_paths < 2) throw parameter_error("mc.n_paths must be at least 2");
    if (mc.workers < 1) throw parameter_error("mc.workers must be at least 1");
    if (!(mc.budget > 0.0)) throw parameter_error("mc.budget must be positive");
    if (queue.n_list.empty()) throw parameter_error("queue.n_list must be nonempty");
    for (size_t i = 0; i < queue.n_list.size(); ++i) {
        if (queue.n_list[i] < 1) throw parameter_error("queue.n_list entries must be >= 1");
        if (i > 0 && queue.n_list[i] <= queue.n_list[i - 1]) {
            throw parameter_error("queue.n_list must be strictly ascending");
        }
    }
    if (kind == experiment_kind::converge_qcp && queue.n_list.size() < 3) {
        throw parameter_error("queue.n_list needs at least 3 entries for converge_qcp");
    }
    if (!(queue.epsilon0 > 0.0) || !(queue.epsilon0 < 1.0)) {
        throw parameter_error("queue.epsilon0 must lie in (0, 1)");
    }
    if (!(queue.patience_slope > 0.0) || !std::isfinite(queue.patience_slope)) {
        throw parameter_error("queue.patience_slope must be positive and finite");
    }
    if (queue.service == "deterministic") {
        if (queue.service_variance != 0.0) {
            throw parameter_error("queue.service_variance must be 0 for deterministic service");
        }
    } else if (!(queue.service_variance > 0.0) || !std::isfinite(queue.service_variance)) {
        throw parameter_error("queue.service_variance must be positive for gamma service");
    }
    if (queue.n_paths < 2) throw parameter_error("queue.n_paths must be at least 2");
    if (!std::isfinite(queue.x0_hat) || queue.x0_hat < 0.0) {
        throw parameter_error("queue.x0_hat must be nonnegative and finite");
    }
    if (!(queue.budget > 0.0)) throw parameter_error("queue.budget must be positive");
    for (double r : sweep.r_values) {
        if (!std::isfinite(r) || r < 0.0) {
            throw parameter_error("sweep.r_values entries must be nonnegative and finite");
        }
    }
    if (sweep.count < 2) throw parameter_error("sweep.count must be at least 2");
}

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig c;
    std::string section;
    std::stringstream ss(text);
    std::string raw;
    long line_no = 0;
    while (std::getline(ss, raw)) {
        ++line_no;
        const std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw parameter_error("malformed section header on line " +
                                      std::to_string(line_no));
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section != "experiment" && section != "dcp" && section != "shooting" &&
                section != "mc" && section != "queue" && section != "sweep" &&
                section != "output") {
                throw parameter_error("unknown config section: " + section);
            }
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw parameter_error("expected key = value on line " + std::to_string(line_no));
        }
        if (section.empty()) {
            throw parameter_error("key outside any section on line " + std::to_string(line_no));
        }
        apply_key(c, section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw parameter_error("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string serialize_config(const ExperimentConfig& c) {
    std::string out;
    out += "[experiment]\n";
    out += "kind = " + std::string(to_string(c.kind)) + "\n\n";
    out += "[dcp]\n";
    out += "sigma = " + fmt(c.dcp.sigma) + "\n";
    out += "theta = " + fmt(c.dcp.theta) + "\n";
    out += "alpha = " + fmt(c.dcp.alpha) + "\n";
    out += "p = " + fmt(c.dcp.p) + "\n";
    out += "cost_family = " + c.dcp.cost_family + "\n";
    out += "cost_beta = " + fmt(c.dcp.cost_beta) + "\n\n";
    out += "[shooting]\n";
    out += "h = " + fmt(c.shooting.h) + "\n";
    out += "x_max = " + fmt(c.shooting.x_max) + "\n";
    out += "r_tolerance = " + fmt(c.shooting.r_tolerance) + "\n";
    out += "w_zero_tolerance = " + fmt(c.shooting.w_zero_tolerance) + "\n";
    out += "delta = " + fmt(c.shooting.delta) + "\n";
    out += "max_bisection_iters = " + std::to_string(c.shooting.max_bisection_iters) + "\n\n";
    out += "[mc]\n";
    out += "dt = " + fmt(c.mc.dt) + "\n";
    out += "horizon = " + fmt(c.mc.horizon) + "\n";
    out += "x0 = " + fmt(c.mc.x0) + "\n";
    out += "n_paths = " + std::to_string(c.mc.n_paths) + "\n";
    out += "seed = " + std::to_string(c.mc.seed) + "\n";
    out += "workers = " + std::to_string(c.mc.workers) + "\n";
    out += "budget = " + fmt(c.mc.budget) + "\n\n";
    out += "[queue]\n";
    out += "n_list = ";
    for (size_t i = 0; i < c.queue.n_list.size(); ++i) {
        if (i > 0) out += ",";
        out += std::to_string(c.queue.n_list[i]);
    }
    out += "\n";
    out += "epsilon0 = " + fmt(c.queue.epsilon0) + "\n";
    out += "patience_slope = " + fmt(c.queue.patience_slope) + "\n";
    out += "patience_infinite = " + std::string(c.queue.patience_infinite ? "true" : "false") +
           "\n";
    out += "service = " + c.queue.service + "\n";
    out += "service_variance = " + fmt(c.queue.service_variance) + "\n";
    out += "n_paths = " + std::to_string(c.queue.n_paths) + "\n";
    out += "x0_hat = " + fmt(c.queue.x0_hat) + "\n";
    out += "budget = " + fmt(c.queue.budget) + "\n\n";
    out += "[sweep]\n";
    out += "r_values = ";
    for (size_t i = 0; i < c.sweep.r_values.size(); ++i) {
        if (i > 0) out += ",";
        out += fmt(c.sweep.r_values[i]);
    }
    out += "\n";
    out += "count = " + std::to_string(c.sweep.count) + "\n\n";
    out += "[output]\n";
    out += "dir = " + c.output.dir + "\n";
    out += "format = " + c.output.format + "\n";
    return out;
}

}  // namespace dcp
