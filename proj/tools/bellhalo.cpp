#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bellhalo/calibration.hpp"
#include "bellhalo/config.hpp"
#include "bellhalo/errors.hpp"
#include "bellhalo/parallel.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace bellhalo;

namespace {

constexpr const char* kVersion = "1.0.0";

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::string out;
    bool force = false;
    std::string manifest;
    std::vector<std::string> files;
};

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string file_hash(const fs::path& path) { return hex(fnv1a(slurp(path))); }

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// Files written by one command; removed again unless commit() is reached.
class OutputSet {
public:
    explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
    }
    ~OutputSet() {
        if (committed_) return;
        for (const auto& f : files_) {
            std::error_code ec;
            fs::remove(f, ec);
        }
    }
    fs::path add(const std::string& name) {
        files_.push_back(dir_ / name);
        return files_.back();
    }
    const std::vector<fs::path>& files() const { return files_; }
    const fs::path& dir() const { return dir_; }
    void commit() { committed_ = true; }

private:
    fs::path dir_;
    std::vector<fs::path> files_;
    bool committed_ = false;
};

json to_json(const RunConfig& c) {
    const auto& s = c.sim.source;
    const auto& d = c.sim.detector;
    const auto& a = c.sim.analysis;
    json j;
    j["master_seed"] = c.sim.master_seed;
    j["event_format"] = c.event_format;
    j["source"] = {{"n_occ", s.n_occ},         {"n_modes", s.n_modes},     {"sigma_bb", s.sigma_bb},
                   {"kz_cap", s.kz_cap},       {"p_penning", s.p_penning}, {"bg_rate", s.bg_rate}};
    j["detector"] = {{"r_tof", d.r_tof},           {"sg_offset", d.sg_offset}, {"distort", d.distort},
                     {"efficiency", d.efficiency}, {"res_xy", d.res_xy},       {"res_z", d.res_z}};
    j["analysis"] = {{"bin_width", a.correlation.bin_width},
                     {"extent", a.correlation.extent},
                     {"mix_depth", a.correlation.mix_depth},
                     {"recenter", a.reconstruction.recenter},
                     {"bootstrap", {{"eta", a.eta}, {"n_resamples", a.n_resamples}}}};
    json sch = json::array();
    for (const auto& e : c.schedule)
        sch.push_back({{"theta_a", e.rotation.theta_a},
                       {"theta_b", e.rotation.theta_b},
                       {"phi", e.rotation.azimuth},
                       {"n_shots", e.n_shots}});
    j["schedule"] = sch;
    return j;
}

RunConfig load(const Options& opt) {
    RunConfig cfg = opt.config.empty() ? parse_run_config("") : load_run_config(opt.config);
    if (opt.seed) cfg.sim.master_seed = *opt.seed;
    cfg.sim.threads = resolve_threads(opt.threads ? *opt.threads : cfg.sim.threads);
    if (!opt.out.empty()) cfg.output_dir = opt.out;
    return cfg;
}

std::string angle_label(double theta) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", theta);
    return buf;
}

std::string entry_label(std::size_t i, const RotationSetting& r) {
    std::string s = std::to_string(i) + "_theta_" + angle_label(r.theta_a);
    if (r.theta_b != r.theta_a) s += "_" + angle_label(r.theta_b);
    return s;
}

const char* pair_name(SpinPair p) {
    static const char* names[] = {"uu", "dd", "ud", "du"};
    return names[static_cast<int>(p)];
}

// S(theta_1, theta_2) from the entries closest to 0 and pi/2.
json witness(const std::vector<BellEstimate>& rows, const std::string& manifest_hash) {
    json j;
    j["manifest_hash"] = manifest_hash;
    if (rows.size() < 2) {
        j["S"] = nullptr;
        j["note"] = "witness needs at least two rotation angles";
        return j;
    }
    auto closest = [&](double target) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (std::abs(rows[i].theta_a - target) < std::abs(rows[best].theta_a - target)) best = i;
        return best;
    };
    std::size_t i1 = closest(0.0), i2 = closest(0.5 * std::numbers::pi);
    if (i1 == i2) i2 = i1 == 0 ? 1 : 0;
    const double s = witness_S(std::clamp(rows[i1].b, -1.0, 1.0), std::clamp(rows[i2].b, -1.0, 1.0));
    const double se = std::hypot(rows[i1].se, rows[i2].se);
    auto sigma = [&](double threshold) { return se > 0.0 ? (s - threshold) / se : 0.0; };
    j["theta_1"] = rows[i1].theta_a;
    j["theta_2"] = rows[i2].theta_a;
    j["S"] = s;
    j["se"] = se;
    j["S_entanglement"] = {{"value", s}, {"threshold", kEntanglementBound}, {"sigma_distance", sigma(kEntanglementBound)}};
    j["S_bell"] = {{"value", s}, {"threshold", kBellBound}, {"sigma_distance", sigma(kBellBound)}};
    return j;
}

void write_outputs_manifest(OutputSet& out, const std::string& source_hash) {
    json files = json::object();
    for (const auto& f : out.files()) files[f.filename().string()] = file_hash(f);
    const fs::path p = out.add("outputs.json");
    write_json(p, {{"manifest_hash", source_hash}, {"files", files}});
}

int cmd_simulate(const Options& opt) {
    const RunConfig cfg = load(opt);
    if (cfg.schedule.empty()) throw ConfigError("schedule: at least one entry is required");
    OutputSet out(cfg.output_dir);
    json entries = json::array();
    std::uint32_t first_id = 0;
    for (std::size_t i = 0; i < cfg.schedule.size(); ++i) {
        const auto& e = cfg.schedule[i];
        const auto hits = simulate_hits(cfg.sim, e.rotation, e.n_shots, first_id);
        const std::string name = "events_" + entry_label(i, e.rotation) + "." + cfg.event_format;
        const fs::path path = out.add(name);
        write_events(hits, path);
        entries.push_back({{"file", name},
                           {"theta_a", e.rotation.theta_a},
                           {"theta_b", e.rotation.theta_b},
                           {"phi", e.rotation.azimuth},
                           {"first_shot_id", first_id},
                           {"n_shots", e.n_shots},
                           {"n_hits", hits.size()},
                           {"hash", file_hash(path)}});
        first_id += e.n_shots;
    }
    json m;
    m["tool"] = "bellhalo";
    m["version"] = kVersion;
    m["master_seed"] = cfg.sim.master_seed;
    m["config"] = to_json(cfg);
    m["entries"] = entries;
    m["manifest_hash"] = hex(fnv1a(m.dump()));
    write_json(out.add("manifest.json"), m);
    out.commit();
    std::cout << "wrote " << cfg.schedule.size() << " event files and manifest.json to " << cfg.output_dir << "\n";
    return 0;
}

int cmd_analyze(const Options& opt) {
    const RunConfig cfg = load(opt);
    struct Input {
        fs::path path;
        RotationSetting rotation;
        std::uint32_t first_id = 0, n_shots = 0;
    };
    std::vector<Input> inputs;
    std::string manifest_hash = "none";

    fs::path manifest_path = opt.manifest;
    if (manifest_path.empty() && !opt.files.empty()) {
        const auto guess = fs::path(opt.files.front()).parent_path() / "manifest.json";
        if (fs::exists(guess)) manifest_path = guess;
    }
    if (!manifest_path.empty()) {
        json m;
        try {
            m = json::parse(slurp(manifest_path));
        } catch (const json::exception& e) {
            throw IoError("manifest " + manifest_path.string() + ": " + e.what());
        }
        manifest_hash = m.value("manifest_hash", "none");
        json copy = m;
        copy.erase("manifest_hash");
        if (hex(fnv1a(copy.dump())) != manifest_hash && !opt.force)
            throw IoError("manifest " + manifest_path.string() + " does not match its hash (use --force)");
        const fs::path dir = manifest_path.parent_path();
        for (const auto& e : m.at("entries")) {
            const fs::path p = dir / e.at("file").get<std::string>();
            if (!opt.files.empty()) {
                bool wanted = false;
                for (const auto& f : opt.files) wanted |= fs::weakly_canonical(f) == fs::weakly_canonical(p);
                if (!wanted) continue;
            }
            if (!fs::exists(p)) throw IoError("missing event file " + p.string());
            if (file_hash(p) != e.at("hash").get<std::string>() && !opt.force)
                throw IoError("event file " + p.string() + " does not match the manifest (use --force)");
            inputs.push_back({p,
                              {e.at("theta_a").get<double>(), e.at("theta_b").get<double>(), e.at("phi").get<double>()},
                              e.at("first_shot_id").get<std::uint32_t>(),
                              e.at("n_shots").get<std::uint32_t>()});
        }
        for (const auto& f : opt.files) {
            bool listed = false;
            for (const auto& in : inputs) listed |= fs::weakly_canonical(in.path) == fs::weakly_canonical(f);
            if (!listed && !opt.force) throw IoError("event file " + f + " is not listed in the manifest (use --force)");
        }
    } else {
        if (opt.files.empty()) throw ConfigError("analyze: no event files and no manifest given");
        if (!opt.force) throw IoError("no manifest found next to the event files (use --force)");
        for (const auto& f : opt.files) inputs.push_back({f, {}, 0, 0});
    }
    if (inputs.empty()) throw ConfigError("analyze: nothing to analyse");

    OutputSet out(cfg.output_dir);
    std::vector<BellEstimate> rows;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        auto& in = inputs[i];
        if (!fs::exists(in.path)) throw IoError("missing event file " + in.path.string());
        const auto hits = read_events(in.path);
        if (in.n_shots == 0) {
            // No manifest: take the shot range spanned by the file.
            if (hits.empty()) throw IoError("event file " + in.path.string() + " is empty");
            std::uint32_t lo = hits.front().shot_id, hi = lo;
            for (const auto& h : hits) {
                lo = std::min(lo, h.shot_id);
                hi = std::max(hi, h.shot_id);
            }
            in.first_id = lo;
            in.n_shots = hi - lo + 1;
            in.rotation = {std::nan(""), std::nan(""), 0.0};
        }
        Analysis a;
        try {
            a = analyze_hits(hits, cfg.sim, in.rotation, in.first_id, in.n_shots);
        } catch (const NumericalError& e) {
            throw NumericalError("analysis of " + in.path.string() + ": " + e.what());
        }
        rows.push_back(a.bell);
        for (SpinPair p : kSpinPairs)
            write_histogram_csv(a.histograms.hist[static_cast<int>(p)],
                                out.add("g2_hist_" + entry_label(i, in.rotation) + "_" + pair_name(p) + ".csv"));
    }
    write_bell_csv(rows, out.add("bell_sweep.csv"));
    write_json(out.add("witness.json"), witness(rows, manifest_hash));
    write_outputs_manifest(out, manifest_hash);
    out.commit();
    std::cout << "analysed " << rows.size() << " settings into " << cfg.output_dir << "\n";
    return 0;
}

int cmd_bell(const Options& opt) {
    const RunConfig cfg = load(opt);
    if (cfg.schedule.empty()) throw ConfigError("schedule: at least one entry is required");
    OutputSet out(cfg.output_dir);
    std::vector<BellEstimate> rows;
    std::uint32_t first_id = 0;
    for (const auto& e : cfg.schedule) {
        rows.push_back(run_setting(cfg.sim, e.rotation, e.n_shots, first_id).bell);
        first_id += e.n_shots;
    }
    const std::string hash = hex(fnv1a(to_json(cfg).dump()));
    write_bell_csv(rows, out.add("bell_sweep.csv"));
    write_json(out.add("witness.json"), witness(rows, hash));
    write_outputs_manifest(out, hash);
    out.commit();
    for (const auto& r : rows) std::printf("theta %.6f  B % .4f +- %.4f\n", r.theta_a, r.b, r.se);
    return 0;
}

int cmd_chsh(const Options& opt) {
    const RunConfig cfg = load(opt);
    OutputSet out(cfg.output_dir);
    const ChshResult r = chsh_run(cfg.chsh.settings, cfg.chsh.n_shots, cfg.sim);
    std::ostringstream csv;
    csv << "theta_a,theta_b,E,se\n";
    char buf[160];
    for (const auto& t : r.terms) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", t.theta_a, t.theta_b, t.b, t.se);
        csv << buf;
    }
    write_text(out.add("chsh.csv"), csv.str());
    const std::string hash = hex(fnv1a(to_json(cfg).dump()));
    write_json(out.add("chsh.json"), {{"B_CHSH", r.value},
                                      {"se", r.se},
                                      {"g2_bb", r.g2_bb},
                                      {"g2_bb_se", r.g2_bb_se},
                                      {"epsilon", r.epsilon},
                                      {"predicted", r.predicted},
                                      {"lhv_bound", 2.0},
                                      {"g2_threshold", kChshG2Threshold},
                                      {"manifest_hash", hash}});
    write_outputs_manifest(out, hash);
    out.commit();
    std::printf("B_CHSH %.4f +- %.4f (2 sqrt2 eps = %.4f, g2_BB = %.3f)\n", r.value, r.se, r.predicted, r.g2_bb);
    return 0;
}

int cmd_source_scan(const Options& opt) {
    const RunConfig cfg = load(opt);
    OutputSet out(cfg.output_dir);
    const auto points = source_scan(cfg.scan.n_occ, cfg.scan.n_shots, cfg.sim);
    std::ostringstream csv;
    csv << "n_occ,g2_bb,se,g2_tmsv\n";
    char buf[160];
    for (const auto& p : points) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", p.n_occ, p.g2_bb, p.se, 2.0 + 1.0 / p.n_occ);
        csv << buf;
    }
    write_text(out.add("source_scan.csv"), csv.str());
    const std::string hash = hex(fnv1a(to_json(cfg).dump()));
    json fit = nullptr;
    if (points.size() >= 2) {
        const auto f = fit_inverse(points);
        fit = {{"a", f.a}, {"se_a", f.se_a}, {"b", f.b}, {"se_b", f.se_b}};
        std::printf("g2_BB = a + b/n: a = %.3f +- %.3f, b = %.4f +- %.4f\n", f.a, f.se_a, f.b, f.se_b);
    }
    write_json(out.add("source_scan.json"), {{"fit", fit}, {"manifest_hash", hash}});
    write_outputs_manifest(out, hash);
    out.commit();
    return 0;
}

json fit_json(const OscillationFit& f) {
    return {{"amplitude", f.amplitude}, {"se_amplitude", f.se_amplitude}, {"frequency", f.frequency},
            {"se_frequency", f.se_frequency}, {"phase", f.phase},         {"offset", f.offset},
            {"decay", f.decay},           {"residual_rms", f.residual_rms}, {"frequency_constrained", f.frequency_constrained}};
}

int cmd_rabi(const Options& opt) {
    const RunConfig cfg = load(opt);
    const auto& r = cfg.rabi;
    OutputSet out(cfg.output_dir);
    std::vector<double> tau(r.points);
    for (std::uint32_t i = 0; i < r.points; ++i) tau[i] = r.tau_max_us * i / (r.points - 1);
    const double omega = 2.0 * std::numbers::pi * r.rabi_khz * 1e-3;  // rad/us
    Rng rng(cfg.sim.master_seed, 0, 101);
    const auto p_down = simulate_rabi(tau, omega, r.amplitude, rng, r.counts_per_point, r.jitter);
    std::ostringstream csv;
    csv << "tau_us,P_up,P_down\n";
    char buf[160];
    for (std::size_t i = 0; i < tau.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", tau[i], 1.0 - p_down[i], p_down[i]);
        csv << buf;
    }
    write_text(out.add("rabi.csv"), csv.str());
    const auto fit = fit_sine(tau, p_down, OscillationModel::Rabi);
    json j = fit_json(fit);
    j["frequency_unit"] = "rad/us";
    j["rabi_khz"] = fit.frequency / (2.0 * std::numbers::pi) * 1e3;
    j["configured_khz"] = r.rabi_khz;
    write_json(out.add("rabi_fit.json"), j);
    write_outputs_manifest(out, hex(fnv1a(to_json(cfg).dump())));
    out.commit();
    std::printf("Rabi frequency %.4f kHz (configured %.4f), amplitude %.4f\n", fit.frequency / (2 * std::numbers::pi) * 1e3,
                r.rabi_khz, fit.amplitude);
    return 0;
}

int cmd_ramsey(const Options& opt) {
    const RunConfig cfg = load(opt);
    const auto& r = cfg.ramsey;
    OutputSet out(cfg.output_dir);
    std::vector<double> phi(r.points);
    for (std::uint32_t i = 0; i < r.points; ++i) phi[i] = 4.0 * std::numbers::pi * i / (r.points - 1);
    Rng rng(cfg.sim.master_seed, 0, 102);
    const auto p_up = simulate_ramsey(phi, r.visibility, rng, r.counts_per_point);
    std::ostringstream csv;
    csv << "phase_rad,P_up,P_down\n";
    char buf[160];
    for (std::size_t i = 0; i < phi.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", phi[i], p_up[i], 1.0 - p_up[i]);
        csv << buf;
    }
    write_text(out.add("ramsey.csv"), csv.str());
    const auto fit = fit_sine(phi, p_up, OscillationModel::Ramsey);
    json j = fit_json(fit);
    j["visibility"] = fit.amplitude;
    write_json(out.add("ramsey_fit.json"), j);
    write_outputs_manifest(out, hex(fnv1a(to_json(cfg).dump())));
    out.commit();
    std::printf("Ramsey visibility %.4f +- %.4f\n", fit.amplitude, fit.se_amplitude);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation and analysis of spin-entangled atom pairs in a scattering halo"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    Options opt;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "YAML run configuration")->check(CLI::ExistingFile);
        sub->add_option("--seed", opt.seed, "Master seed (overrides the config)");
        sub->add_option("--threads", opt.threads, "Worker threads (default: BELLHALO_THREADS, then all cores)");
        sub->add_option("--out", opt.out, "Output directory (overrides the config)");
        sub->add_flag("--force", opt.force, "Accept event files that do not match their manifest");
    };

    auto* simulate = app.add_subcommand("simulate", "Simulate the schedule and write event files plus manifest.json");
    auto* analyze = app.add_subcommand("analyze", "Reconstruct and correlate event files");
    analyze->add_option("files", opt.files, "Event files (default: all entries of the manifest)");
    analyze->add_option("--manifest", opt.manifest, "manifest.json written by simulate");
    auto* bell = app.add_subcommand("bell", "Simulate and analyse the schedule in memory");
    auto* chsh = app.add_subcommand("chsh", "CHSH combination with independent angles on the two halo halves");
    auto* scan = app.add_subcommand("source-scan", "Back-to-back g2 against mode occupation");
    auto* rabi = app.add_subcommand("rabi", "Simulate and fit a Rabi oscillation");
    auto* ramsey = app.add_subcommand("ramsey", "Simulate and fit a Ramsey fringe");
    for (auto* s : {simulate, analyze, bell, chsh, scan, rabi, ramsey}) common(s);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(opt);
        if (analyze->parsed()) return cmd_analyze(opt);
        if (bell->parsed()) return cmd_bell(opt);
        if (chsh->parsed()) return cmd_chsh(opt);
        if (scan->parsed()) return cmd_source_scan(opt);
        if (rabi->parsed()) return cmd_rabi(opt);
        if (ramsey->parsed()) return cmd_ramsey(opt);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
