#include "bellhalo/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <regex>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "bellhalo/errors.hpp"

namespace bellhalo {
namespace {

[[noreturn]] void fail(const std::string& key, const std::string& what) { throw ConfigError(key + ": " + what); }

void check_keys(const YAML::Node& node, const std::string& path, const std::set<std::string>& allowed) {
    if (!node.IsMap()) fail(path.empty() ? "config" : path, "expected a mapping");
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.count(key)) fail(path.empty() ? key : path + "." + key, "unknown key");
    }
}

template <class T>
void read(const YAML::Node& node, const char* name, const std::string& path, T& out) {
    const YAML::Node v = node[name];
    if (!v) return;
    try {
        out = v.as<T>();
    } catch (const YAML::Exception&) {
        fail(path + name, "invalid value '" + YAML::Dump(v) + "'");
    }
}

void read_angle(const YAML::Node& node, const char* name, const std::string& path, double& out) {
    const YAML::Node v = node[name];
    if (!v) return;
    if (!v.IsScalar()) fail(path + name, "expected an angle");
    try {
        out = parse_angle(v.Scalar());
    } catch (const ConfigError& e) {
        fail(path + name, e.what());
    }
}

}  // namespace

double parse_angle(const std::string& text) {
    static const std::regex re(R"(^\s*([+-])?\s*((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\s*(\*?\s*pi)?\s*(?:/\s*(\d+\.?\d*))?\s*$)");
    std::smatch m;
    if (!std::regex_match(text, m, re) || (!m[2].matched && !m[3].matched))
        throw ConfigError("cannot parse angle '" + text + "'");
    if (m[3].matched && m[3].str().find('*') != std::string::npos && !m[2].matched)
        throw ConfigError("cannot parse angle '" + text + "'");
    double v = m[2].matched ? std::stod(m[2].str()) : 1.0;
    if (m[3].matched) v *= std::numbers::pi;
    if (m[4].matched) {
        const double d = std::stod(m[4].str());
        if (d == 0.0) throw ConfigError("division by zero in angle '" + text + "'");
        v /= d;
    }
    if (m[1].matched && m[1].str() == "-") v = -v;
    if (!std::isfinite(v)) throw ConfigError("angle '" + text + "' is not finite");
    return v;
}

RunConfig parse_run_config(const std::string& yaml_text) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("config: YAML syntax error: ") + e.what());
    }
    if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    check_keys(root, "",
               {"preset", "master_seed", "threads", "output_dir", "event_format", "source", "detector", "analysis",
                "schedule", "chsh", "scan", "rabi", "ramsey"});

    RunConfig cfg;
    if (const auto p = root["preset"]) {
        const auto name = p.as<std::string>();
        if (name == "ideal")
            cfg.sim = ideal_preset();
        else if (name == "realistic")
            cfg.sim = realistic_preset();
        else
            fail("preset", "unknown preset '" + name + "' (ideal, realistic)");
    }
    read(root, "master_seed", "", cfg.sim.master_seed);
    read(root, "threads", "", cfg.sim.threads);
    read(root, "output_dir", "", cfg.output_dir);
    read(root, "event_format", "", cfg.event_format);
    if (cfg.event_format != "csv" && cfg.event_format != "bhev") fail("event_format", "must be csv or bhev");

    if (const auto s = root["source"]) {
        check_keys(s, "source", {"n_occ", "n_modes", "sigma_bb", "kz_cap", "p_penning", "bg_rate"});
        auto& c = cfg.sim.source;
        read(s, "n_occ", "source.", c.n_occ);
        read(s, "n_modes", "source.", c.n_modes);
        read(s, "sigma_bb", "source.", c.sigma_bb);
        read(s, "kz_cap", "source.", c.kz_cap);
        read(s, "p_penning", "source.", c.p_penning);
        read(s, "bg_rate", "source.", c.bg_rate);
    }
    if (const auto d = root["detector"]) {
        check_keys(d, "detector", {"r_tof", "sg_offset", "distort", "efficiency", "res_xy", "res_z"});
        auto& c = cfg.sim.detector;
        read(d, "r_tof", "detector.", c.r_tof);
        read(d, "sg_offset", "detector.", c.sg_offset);
        if (const auto v = d["distort"]) {
            if (!v.IsSequence() || v.size() != 3) fail("detector.distort", "expected a list of 3 factors");
            for (std::size_t i = 0; i < 3; ++i) {
                try {
                    c.distort[i] = v[i].as<double>();
                } catch (const YAML::Exception&) {
                    fail("detector.distort", "invalid factor");
                }
            }
        }
        read(d, "efficiency", "detector.", c.efficiency);
        read(d, "res_xy", "detector.", c.res_xy);
        read(d, "res_z", "detector.", c.res_z);
    }
    if (const auto a = root["analysis"]) {
        check_keys(a, "analysis", {"bin_width", "extent", "mix_depth", "recenter", "bootstrap"});
        auto& c = cfg.sim.analysis;
        read(a, "bin_width", "analysis.", c.correlation.bin_width);
        read(a, "extent", "analysis.", c.correlation.extent);
        read(a, "mix_depth", "analysis.", c.correlation.mix_depth);
        read(a, "recenter", "analysis.", c.reconstruction.recenter);
        c.reconstruction.recentering.window = 5.0 * c.correlation.bin_width;
        if (const auto b = a["bootstrap"]) {
            check_keys(b, "analysis.bootstrap", {"eta", "n_resamples"});
            read(b, "eta", "analysis.bootstrap.", c.eta);
            read(b, "n_resamples", "analysis.bootstrap.", c.n_resamples);
        }
    }
    if (const auto sch = root["schedule"]) {
        if (!sch.IsSequence()) fail("schedule", "expected a list");
        for (std::size_t i = 0; i < sch.size(); ++i) {
            const std::string path = "schedule[" + std::to_string(i) + "].";
            check_keys(sch[i], path.substr(0, path.size() - 1), {"theta", "theta_a", "theta_b", "phi", "n_shots"});
            ScheduleEntry e;
            double theta = 0.0;
            read_angle(sch[i], "theta", path, theta);
            e.rotation = RotationSetting::common(theta);
            read_angle(sch[i], "theta_a", path, e.rotation.theta_a);
            read_angle(sch[i], "theta_b", path, e.rotation.theta_b);
            read_angle(sch[i], "phi", path, e.rotation.azimuth);
            if (!(e.rotation.azimuth >= 0.0 && e.rotation.azimuth < 2.0 * std::numbers::pi))
                fail(path + "phi", "must be in [0, 2 pi)");
            read(sch[i], "n_shots", path, e.n_shots);
            if (e.n_shots < 1) fail(path + "n_shots", "must be >= 1");
            cfg.schedule.push_back(e);
        }
    }
    if (const auto c = root["chsh"]) {
        check_keys(c, "chsh", {"a", "a_prime", "b", "b_prime", "n_shots"});
        read_angle(c, "a", "chsh.", cfg.chsh.settings.a);
        read_angle(c, "a_prime", "chsh.", cfg.chsh.settings.a_prime);
        read_angle(c, "b", "chsh.", cfg.chsh.settings.b);
        read_angle(c, "b_prime", "chsh.", cfg.chsh.settings.b_prime);
        read(c, "n_shots", "chsh.", cfg.chsh.n_shots);
        if (cfg.chsh.n_shots < 10) fail("chsh.n_shots", "must be >= 10");
    }
    if (const auto s = root["scan"]) {
        check_keys(s, "scan", {"n_occ", "n_shots"});
        read(s, "n_occ", "scan.", cfg.scan.n_occ);
        read(s, "n_shots", "scan.", cfg.scan.n_shots);
        if (cfg.scan.n_occ.empty()) fail("scan.n_occ", "must not be empty");
        for (double n : cfg.scan.n_occ)
            if (!(n > 0.0)) fail("scan.n_occ", "values must be > 0");
        if (cfg.scan.n_shots < 10) fail("scan.n_shots", "must be >= 10");
    }
    if (const auto r = root["rabi"]) {
        check_keys(r, "rabi", {"rabi_khz", "amplitude", "tau_max_us", "points", "counts_per_point", "jitter"});
        read(r, "rabi_khz", "rabi.", cfg.rabi.rabi_khz);
        read(r, "amplitude", "rabi.", cfg.rabi.amplitude);
        read(r, "tau_max_us", "rabi.", cfg.rabi.tau_max_us);
        read(r, "points", "rabi.", cfg.rabi.points);
        read(r, "counts_per_point", "rabi.", cfg.rabi.counts_per_point);
        read(r, "jitter", "rabi.", cfg.rabi.jitter);
        if (!(cfg.rabi.rabi_khz > 0.0)) fail("rabi.rabi_khz", "must be > 0");
        if (!(cfg.rabi.amplitude >= 0.0 && cfg.rabi.amplitude <= 1.0)) fail("rabi.amplitude", "must be in [0, 1]");
        if (!(cfg.rabi.tau_max_us > 0.0)) fail("rabi.tau_max_us", "must be > 0");
        if (cfg.rabi.points < 8) fail("rabi.points", "must be >= 8");
        if (!(cfg.rabi.jitter >= 0.0)) fail("rabi.jitter", "must be >= 0");
    }
    if (const auto r = root["ramsey"]) {
        check_keys(r, "ramsey", {"visibility", "points", "counts_per_point"});
        read(r, "visibility", "ramsey.", cfg.ramsey.visibility);
        read(r, "points", "ramsey.", cfg.ramsey.points);
        read(r, "counts_per_point", "ramsey.", cfg.ramsey.counts_per_point);
        if (!(cfg.ramsey.visibility >= 0.0 && cfg.ramsey.visibility <= 1.0))
            fail("ramsey.visibility", "must be in [0, 1]");
        if (cfg.ramsey.points < 8) fail("ramsey.points", "must be >= 8");
    }

    cfg.sim.validate();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_run_config(text.str());
}

}  // namespace bellhalo
