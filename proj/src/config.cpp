#include "koopman/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>

#include "koopman/error.hpp"

namespace koopman {

int ExperimentConfig::training_steps() const { return static_cast<int>(std::lround(horizon / dt)); }

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double to_double(const std::string& s) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) {
        throw InvalidArgument("expected a number, got '" + s + "'");
    }
    return v;
}

template <class T>
T to_integer(const std::string& s) {
    T v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw InvalidArgument("expected an integer, got '" + s + "'");
    return v;
}

bool to_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw InvalidArgument("expected a boolean, got '" + s + "'");
}

std::vector<double> to_vector(const std::string& s) {
    std::vector<double> v;
    for (const auto& part : split(s, ',')) v.push_back(to_double(part));
    return v;
}

// "a, b; c, d"
std::vector<std::vector<double>> to_points(const std::string& s) {
    std::vector<std::vector<double>> pts;
    for (const auto& part : split(s, ';')) {
        if (!part.empty()) pts.push_back(to_vector(part));
    }
    return pts;
}

Range to_range(const std::string& s) {
    // start:step:stop
    auto parts = split(s, ':');
    if (parts.size() != 3) throw InvalidArgument("expected start:step:stop, got '" + s + "'");
    return {to_double(parts[0]), to_double(parts[1]), to_double(parts[2])};
}

std::string num(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v[i]);
    return s;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter, std::less<>>& setters() {
    static const std::map<std::string, Setter, std::less<>> table{
        {"smib.R", [](auto& c, auto& v) { c.smib.R = to_double(v); }},
        {"smib.X", [](auto& c, auto& v) { c.smib.X = to_double(v); }},
        {"smib.V1", [](auto& c, auto& v) { c.smib.V1 = to_double(v); }},
        {"smib.V2", [](auto& c, auto& v) { c.smib.V2 = to_double(v); }},
        {"smib.P", [](auto& c, auto& v) { c.smib.P = to_double(v); }},
        {"smib.Xd", [](auto& c, auto& v) { c.smib.Xd = to_double(v); }},
        {"smib.D", [](auto& c, auto& v) { c.smib.D = to_double(v); }},
        {"smib.H", [](auto& c, auto& v) { c.smib.H = to_double(v); }},
        {"smib.f", [](auto& c, auto& v) { c.smib.f = to_double(v); }},
        {"lattice.delta", [](auto& c, auto& v) { c.lattice.axes.at(0) = to_range(v); }},
        {"lattice.omega", [](auto& c, auto& v) { c.lattice.axes.at(1) = to_range(v); }},
        {"dt", [](auto& c, auto& v) { c.dt = to_double(v); }},
        {"horizon", [](auto& c, auto& v) { c.horizon = to_double(v); }},
        {"substeps", [](auto& c, auto& v) { c.substeps = to_integer<int>(v); }},
        {"dictionaries",
         [](auto& c, auto& v) {
             c.dictionaries.clear();
             for (auto& d : split(v, ',')) {
                 if (!d.empty()) c.dictionaries.push_back(d);
             }
         }},
        {"rbf_seed", [](auto& c, auto& v) { c.rbf_seed = to_integer<std::uint64_t>(v); }},
        {"sv_rel_tol", [](auto& c, auto& v) { c.sv_rel_tol = to_double(v); }},
        {"kkf.process_noise", [](auto& c, auto& v) { c.process_noise = to_double(v); }},
        {"kkf.measurement_noise", [](auto& c, auto& v) { c.measurement_noise = to_double(v); }},
        {"kkf.sigma", [](auto& c, auto& v) { c.sigma = to_double(v); }},
        {"kkf.P0", [](auto& c, auto& v) { c.P0_scale = to_double(v); }},
        {"kkf.duration", [](auto& c, auto& v) { c.kkf_duration = to_double(v); }},
        {"kkf.guess", [](auto& c, auto& v) { c.kkf_guess = to_vector(v); }},
        {"kkf.relift", [](auto& c, auto& v) { c.relift = to_bool(v); }},
        {"kkf.relift_covariance", [](auto& c, auto& v) { c.relift_covariance = to_bool(v); }},
        {"kkf.cases", [](auto& c, auto& v) { c.cases = to_points(v); }},
        {"seed", [](auto& c, auto& v) { c.master_seed = to_integer<std::uint64_t>(v); }},
        {"recon.start", [](auto& c, auto& v) { c.recon_start = to_vector(v); }},
        {"recon.horizon", [](auto& c, auto& v) { c.recon_horizon = to_double(v); }},
        {"output_dir", [](auto& c, auto& v) { c.output_dir = v; }},
        {"threads", [](auto& c, auto& v) { c.threads = to_integer<unsigned>(v); }},
    };
    return table;
}

void check(const ExperimentConfig& c) {
    if (!(c.dt > 0.0)) throw InvalidArgument("dt must be positive");
    if (!(c.horizon >= c.dt)) throw InvalidArgument("horizon must cover at least one step");
    if (c.substeps < 1) throw InvalidArgument("substeps must be at least 1");
    if (c.kkf_guess.size() != 2) throw InvalidArgument("kkf.guess needs two values");
    if (c.recon_start.size() != 2) throw InvalidArgument("recon.start needs two values");
    for (const auto& p : c.cases) {
        if (p.size() != 2) throw InvalidArgument("each case needs two values");
    }
}

}  // namespace

ExperimentConfig parse_config(std::string_view text, ExperimentConfig cfg) {
    int line_no = 0;
    std::size_t offset = 0;
    std::istringstream in{std::string(text)};
    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::size_t here = offset;
        offset += raw.size() + 1;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
        std::string line = trim(raw);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("config line " + std::to_string(line_no) + ": expected '='", here);
        std::string key = trim(std::string_view(line).substr(0, eq));
        std::string value = trim(std::string_view(line).substr(eq + 1));
        auto it = setters().find(key);
        if (it == setters().end()) {
            throw ParseError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'", here);
        }
        try {
            it->second(cfg, value);
        } catch (const InvalidArgument& e) {
            throw ParseError("config line " + std::to_string(line_no) + " (" + key + "): " + e.what(), here);
        }
    }
    check(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

std::string format_config(const ExperimentConfig& c) {
    std::ostringstream os;
    auto range = [](const Range& r) { return num(r.start) + ":" + num(r.step) + ":" + num(r.stop); };
    os << "smib.R = " << num(c.smib.R) << "\n"
       << "smib.X = " << num(c.smib.X) << "\n"
       << "smib.V1 = " << num(c.smib.V1) << "\n"
       << "smib.V2 = " << num(c.smib.V2) << "\n"
       << "smib.P = " << num(c.smib.P) << "\n"
       << "smib.Xd = " << num(c.smib.Xd) << "\n"
       << "smib.D = " << num(c.smib.D) << "\n"
       << "smib.H = " << num(c.smib.H) << "\n"
       << "smib.f = " << num(c.smib.f) << "\n"
       << "lattice.delta = " << range(c.lattice.axes.at(0)) << "\n"
       << "lattice.omega = " << range(c.lattice.axes.at(1)) << "\n"
       << "dt = " << num(c.dt) << "\n"
       << "horizon = " << num(c.horizon) << "\n"
       << "substeps = " << c.substeps << "\n";
    os << "dictionaries = ";
    for (std::size_t i = 0; i < c.dictionaries.size(); ++i) os << (i ? ", " : "") << c.dictionaries[i];
    os << "\n"
       << "rbf_seed = " << c.rbf_seed << "\n"
       << "sv_rel_tol = " << num(c.sv_rel_tol) << "\n"
       << "kkf.process_noise = " << num(c.process_noise) << "\n"
       << "kkf.measurement_noise = " << num(c.measurement_noise) << "\n"
       << "kkf.sigma = " << num(c.sigma) << "\n"
       << "kkf.P0 = " << num(c.P0_scale) << "\n"
       << "kkf.duration = " << num(c.kkf_duration) << "\n"
       << "kkf.guess = " << join(c.kkf_guess) << "\n"
       << "kkf.relift = " << (c.relift ? "true" : "false") << "\n"
       << "kkf.relift_covariance = " << (c.relift_covariance ? "true" : "false") << "\n";
    os << "kkf.cases = ";
    for (std::size_t i = 0; i < c.cases.size(); ++i) os << (i ? "; " : "") << join(c.cases[i]);
    os << "\n"
       << "seed = " << c.master_seed << "\n"
       << "recon.start = " << join(c.recon_start) << "\n"
       << "recon.horizon = " << num(c.recon_horizon) << "\n"
       << "output_dir = " << c.output_dir << "\n"
       << "threads = " << c.threads << "\n";
    return os.str();
}

std::vector<std::vector<double>> rbf_centers(const ExperimentConfig& cfg, int count) {
    if (count < 0) throw InvalidArgument("negative center count");
    std::mt19937_64 rng(cfg.rbf_seed);
    std::vector<std::uniform_real_distribution<double>> axes;
    for (const Range& r : cfg.lattice.axes) axes.emplace_back(r.start, r.stop);
    std::vector<std::vector<double>> centers;
    for (int i = 0; i < count; ++i) {
        std::vector<double> c;
        for (auto& u : axes) c.push_back(u(rng));
        centers.push_back(std::move(c));
    }
    return centers;
}

ObservableSet make_dictionary(const ExperimentConfig& cfg, std::string_view label, const OdeSystem& sys) {
    if (label == "lie") {
        ObservableSet obs = observables_from_lift(lift(sys));
        if (obs.q() <= obs.n()) throw InvalidArgument("lift of this system gives no observables beyond the states");
        return obs;
    }
    auto number = [&](std::size_t prefix) {
        std::string digits(label.substr(prefix));
        if (digits.empty()) throw InvalidArgument("bad dictionary name '" + std::string(label) + "'");
        return to_integer<int>(digits);
    };
    if (label.size() > 1 && label[0] == 'p') return monomial_dictionary(sys.state_names, number(1));
    if (label.size() > 3 && label.substr(0, 3) == "rbf") {
        const int total = number(3);
        const int n = static_cast<int>(sys.dimension());
        if (total <= n) throw InvalidArgument("rbf dictionary size must exceed the state dimension");
        return rbf_dictionary(sys.state_names, total, rbf_centers(cfg, total - n));
    }
    throw InvalidArgument("unknown dictionary '" + std::string(label) + "'");
}

}  // namespace koopman
