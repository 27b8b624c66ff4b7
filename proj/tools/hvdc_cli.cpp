// hvdc: size DC inductors, sweep fault-location envelopes, replay designs.
#include <CLI11.hpp>

#include <atomic>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "hvdc/config.hpp"
#include "hvdc/emt/simulator.hpp"
#include "hvdc/report.hpp"
#include "hvdc/sizing.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hvdc;

namespace {

enum Exit { kOk = 0, kUsage = 1, kConfig = 2, kSizing = 3, kMismatch = 4 };

int report_error(const std::string& kind, const std::string& message, int code) {
    json rec = {{"error", kind}, {"message", message}, {"exit_code", code}};
    std::cerr << rec.dump() << '\n';
    return code;
}

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<DesignScenario> select_scenarios(const Config& cfg, const std::string& sel) {
    if (sel == "all") return cfg.scenarios;
    std::vector<DesignScenario> out;
    for (const auto& id : split(sel)) {
        auto it = std::find_if(cfg.scenarios.begin(), cfg.scenarios.end(), [&](auto& s) { return s.id == id; });
        if (it == cfg.scenarios.end()) throw ConfigError("unknown scenario '" + id + "'");
        out.push_back(*it);
    }
    return out;
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << text;
}

struct SizeArgs {
    std::string config;
    std::string scenarios = "all";
    std::string out = "out";
    int jobs = 1;
    std::string exports = "csv,json";
    bool fixpoint = false;
    double dt_us = 0.0;
};

int cmd_size(const SizeArgs& a) {
    Config cfg;
    std::vector<DesignScenario> scens;
    try {
        cfg = load_config(a.config);
        scens = select_scenarios(cfg, a.scenarios);
    } catch (const ValidationError& e) {
        return report_error("validation", e.what(), kConfig);
    } catch (const std::exception& e) {
        return report_error("config", e.what(), kConfig);
    }
    if (a.dt_us > 0.0)
        for (auto& s : scens) s.dt_us = a.dt_us;
    const auto exports = split(a.exports);
    auto wants = [&](const char* k) { return std::find(exports.begin(), exports.end(), k) != exports.end(); };

    std::vector<ScenarioOutcome> outcomes(scens.size());
    std::atomic<std::size_t> next{0};
    SizeAllOptions opts;
    opts.refine_to_fixpoint = a.fixpoint;
    auto worker = [&] {
        emt::EmtSimulator sim;
        for (std::size_t i = next++; i < scens.size(); i = next++) {
            auto& o = outcomes[i];
            o.scenario = scens[i];
            try {
                o.report = size_all(sim, cfg.model, scens[i], opts);
            } catch (const SizingError& e) {
                o.error = e.what();
                o.partial = e.trace();
            } catch (const std::exception& e) {
                o.error = e.what();
            }
        }
    };
    const int n = std::max(1, std::min<int>(a.jobs, static_cast<int>(scens.size())));
    std::vector<std::thread> pool;
    for (int i = 1; i < n; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    const fs::path out(a.out);
    fs::create_directories(out);
    if (wants("json")) write_file(out / "report.json", report_document(cfg, outcomes).dump(2) + "\n");
    if (wants("csv")) {
        std::ostringstream os;
        write_summary_csv(os, cfg.model, outcomes);
        write_file(out / "summary.csv", os.str());
    }
    if (wants("traces")) {
        fs::create_directories(out / "traces");
        for (const auto& o : outcomes) {
            if (!o.ok()) continue;
            for (const auto& b : o.report->breakers) {
                std::ostringstream os;
                write_iteration_csv(os, b);
                write_file(out / "traces" / (b.breaker + "_" + o.scenario.id + ".csv"), os.str());
            }
        }
    }

    int failed = 0;
    for (const auto& o : outcomes) {
        if (!o.ok()) {
            ++failed;
            std::cerr << json({{"error", "sizing"}, {"scenario", o.scenario.id}, {"message", o.error}}).dump() << '\n';
            continue;
        }
        std::cout << o.scenario.id;
        for (const auto& b : o.report->breakers)
            std::cout << "  " << b.breaker << "=" << fmt(b.l_final_mh) << " mH (" << b.governing_zone << ")";
        std::cout << "  runs=" << o.report->emt_runs << '\n';
    }
    return failed ? kSizing : kOk;
}

struct EnvelopeArgs {
    std::string config;
    std::string scenario;
    std::string breaker;
    std::string zone;
    std::string cable;
    std::string t_n;
    double l_mh = -1.0;
    std::string out = "out";
};

int cmd_envelope(const EnvelopeArgs& a) {
    const auto t_ns = split(a.t_n);
    if (t_ns.empty()) return report_error("usage", "--tn needs at least one value", kUsage);
    std::vector<double> t_n;
    try {
        for (const auto& s : t_ns) t_n.push_back(std::stod(s));
    } catch (const std::exception&) {
        return report_error("usage", "--tn must be a comma-separated list of numbers", kUsage);
    }
    try {
        const Config cfg = load_config(a.config);
        auto scens = select_scenarios(cfg, a.scenario.empty() ? cfg.scenarios.front().id : a.scenario);
        const auto& scen = scens.front();
        const GridModel model = cfg.model.with_scenario(scen);
        const auto& br = model.breaker(a.breaker);
        const auto crit = critical_converter(model, a.zone, model.zone_of_bus(br.from) == a.zone ? br.from : br.to);
        const auto sp = critical_power_flow(model, a.breaker, a.zone, crit);
        FaultCase fc = critical_fault_case(model, a.breaker, a.zone, crit, sp);
        emt::EmtSimulator sim;
        if (!a.cable.empty()) {
            const auto& c = model.cable(a.cable);
            if (c.from != fc.far_bus && c.to != fc.far_bus)
                throw ConfigError("cable " + a.cable + " does not start at bus " + fc.far_bus);
        }
        const double l = a.l_mh >= 0.0 ? a.l_mh
                                        : inductor_for_breaker(model.nominal_voltage_kv(), 0.0, scen.i_cb_max_ka,
                                                               br.params.i_rated_ka, scen.neutralization_time_ms());
        fc.inductances_mh[a.breaker] = l;
        if (!a.cable.empty()) fc.fault = FaultLocation{fc.far_bus, a.cable, 0.0};
        const VoltageEnvelope env = voltage_envelope(sim, model, scen, fc);
        const fs::path out(a.out);
        fs::create_directories(out);
        std::ostringstream os;
        write_envelope_csv(os, env, t_n, 1e-3 * model.nominal_voltage_kv());
        write_file(out / "envelope.csv", os.str());

        std::cout << "cable " << env.cable << ", L = " << fmt(l) << " mH, t_c = "
                  << (env.t_c_ms ? fmt(*env.t_c_ms) + " ms" : std::string("not reached")) << '\n';
        for (double tn : t_n) {
            const auto& p = env.points[env.critical_index(tn, 1e-3 * model.nominal_voltage_kv())];
            std::cout << "t_n = " << fmt(tn) << " ms: U_m = " << fmt(env.u_m_at(tn)) << " kV, critical position "
                      << fmt(p.position_km) << " km\n";
        }
    } catch (const ConfigError& e) {
        return report_error("config", e.what(), kConfig);
    } catch (const std::exception& e) {
        return report_error("simulation", e.what(), kSizing);
    }
    return kOk;
}

struct ReplayArgs {
    std::string config;
    std::string report;
    std::string scenario;
    std::string breaker;
    std::string zone;
    double scale = 1.0;
    std::string out = "out";
};

int cmd_replay(const ReplayArgs& a) {
    try {
        const Config cfg = load_config(a.config);
        std::ifstream f(a.report);
        if (!f) throw ConfigError("cannot open report " + a.report);
        const json rep = json::parse(f);
        if (rep.value("config_hash", "") != config_hash(cfg))
            return report_error("mismatch", "report was produced from a different configuration", kMismatch);

        const json* sj = nullptr;
        for (const auto& s : rep.at("scenarios"))
            if (s.at("id") == a.scenario) sj = &s;
        if (!sj || sj->at("status") != "ok") throw ConfigError("scenario '" + a.scenario + "' has no design in report");
        auto scen = select_scenarios(cfg, a.scenario).front();
        scen.dt_us = sj->at("dt_us").get<double>();

        std::map<std::string, double> final_mh = sj->at("final_mH").get<std::map<std::string, double>>();
        const json* dir = nullptr;
        for (const auto& b : sj->at("breakers"))
            if (b.at("id") == a.breaker)
                for (const auto& d : b.at("directions"))
                    if (d.at("zone") == a.zone) dir = &d;
        if (!dir) throw ConfigError("no fault case for " + a.breaker + " / " + a.zone);
        final_mh[a.breaker] *= a.scale;

        const GridModel model = apply_inductances(cfg.model.with_scenario(scen), final_mh);
        FaultCase fc = fault_case_from_json(dir->at("fault_case"));
        fc.inductances_mh.clear();
        emt::EmtSimulator sim;
        const auto res = sim.run(model, scen, fc);

        const fs::path out(a.out);
        fs::create_directories(out);
        const fs::path traces = out / ("replay_" + a.breaker + "_" + a.zone + "_" + a.scenario + ".csv");
        emt::write_traces_csv(res, traces);

        json summary = {{"scenario", a.scenario},
                        {"breaker", a.breaker},
                        {"zone", a.zone},
                        {"L_mH", final_mh[a.breaker]},
                        {"measured", to_json(res.measured)},
                        {"I_cb_max_kA", scen.i_cb_max_ka},
                        {"traces", traces.filename().string()}};
        if (fc.critical_converter) {
            const auto& cv = model.converter(*fc.critical_converter).params;
            summary["arm_limit_kA"] = scen.k_pu * cv.i_arm_rated_ka;
        }
        json blocks = json::array();
        for (const auto& b : res.blocks) {
            const auto z = model.zone_of_converter(b.converter);
            blocks.push_back({{"converter", b.converter},
                              {"time_ms", b.time_ms},
                              {"zone", z ? *z : ""},
                              {"healthy_zone", !z || *z != fc.faulted_zone}});
        }
        summary["blocks"] = blocks;
        write_file(out / ("replay_" + a.breaker + "_" + a.zone + "_" + a.scenario + ".json"), summary.dump(2) + "\n");
        std::cout << summary.dump(2) << '\n';
    } catch (const ConfigError& e) {
        return report_error("config", e.what(), kConfig);
    } catch (const json::exception& e) {
        return report_error("report", e.what(), kConfig);
    } catch (const std::exception& e) {
        return report_error("simulation", e.what(), kSizing);
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DC inductor sizing for HVDC protection zones"};
    app.require_subcommand(1);

    SizeArgs sa;
    auto* size = app.add_subcommand("size", "size every inductor for the selected scenarios");
    size->add_option("--config", sa.config, "configuration file")->required()->check(CLI::ExistingFile);
    size->add_option("--scenarios", sa.scenarios, "comma-separated ids or 'all'");
    size->add_option("--out", sa.out, "output directory");
    size->add_option("--jobs", sa.jobs, "scenarios sized in parallel")->check(CLI::PositiveNumber);
    size->add_option("--export", sa.exports, "any of csv,json,traces");
    size->add_flag("--refine-to-fixpoint", sa.fixpoint, "repeat refinement until nothing moves");
    size->add_option("--dt-us", sa.dt_us, "override the simulation step")->check(CLI::PositiveNumber);

    EnvelopeArgs ea;
    auto* envelope = app.add_subcommand("envelope", "fault-location sweep along the faulted cable");
    envelope->add_option("--config", ea.config)->required()->check(CLI::ExistingFile);
    envelope->add_option("--scenario", ea.scenario, "scenario supplying breaker and converter data");
    envelope->add_option("--breaker", ea.breaker)->required();
    envelope->add_option("--zone", ea.zone, "protected zone")->required();
    envelope->add_option("--cable", ea.cable, "cable to sweep (default: first at the far terminal)");
    envelope->add_option("--tn", ea.t_n, "comma-separated neutralization times in ms")->required();
    envelope->add_option("--L-mH", ea.l_mh, "study inductance (default: breaker requirement with U_m = 0)");
    envelope->add_option("--out", ea.out);

    ReplayArgs ra;
    auto* replay = app.add_subcommand("replay", "re-run one critical fault case at the designed inductances");
    replay->add_option("--config", ra.config)->required()->check(CLI::ExistingFile);
    replay->add_option("--report", ra.report)->required()->check(CLI::ExistingFile);
    replay->add_option("--scenario", ra.scenario)->required();
    replay->add_option("--breaker", ra.breaker)->required();
    replay->add_option("--zone", ra.zone, "protected zone of the fault case")->required();
    replay->add_option("--scale", ra.scale, "multiply the study inductance")->check(CLI::PositiveNumber);
    replay->add_option("--out", ra.out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }
    if (*size) return cmd_size(sa);
    if (*envelope) return cmd_envelope(ea);
    return cmd_replay(ra);
}
