#include "hvdc/emt/network.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <sstream>

namespace hvdc::emt {

namespace {

constexpr double kTimeEps = 1e-9;

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

const char* to_string(BreakerPhase p) {
    switch (p) {
        case BreakerPhase::Closed: return "closed";
        case BreakerPhase::Commutating: return "commutating";
        case BreakerPhase::Clamping: return "clamping";
        case BreakerPhase::Open: return "open";
    }
    return "?";
}

double LineSection::delayed(const std::vector<double>& w) const {
    const auto size = w.size();
    const auto d0 = static_cast<std::size_t>(std::floor(delay_steps));
    const double f = delay_steps - static_cast<double>(d0);
    // sample n - d0 sits (d0 - 1) slots behind head, n - d0 - 1 sits d0 behind
    const double a = w[(head + size - (d0 - 1)) % size];
    const double b = w[(head + size - d0) % size];
    return (1.0 - f) * a + f * b;
}

double LineSection::stored_energy(double dt) const {
    // waves in flight: outgoing wave f = Z w / 2 carries power f^2 / Z
    const auto size = wk.size();
    const auto d0 = static_cast<std::size_t>(std::floor(delay_steps));
    const double f = delay_steps - static_cast<double>(d0);
    double sum = 0.0;
    for (std::size_t j = 0; j <= d0; ++j) {
        const double weight = (j < d0) ? 1.0 : f;
        const double a = wk[(head + size - j) % size];
        const double b = wm[(head + size - j) % size];
        sum += weight * (a * a + b * b);
    }
    return sum * z / 4.0 * dt;
}

double ConverterModel::arm_current_estimate(double i_dc) const {
    return std::abs(i_dc) / 3.0 + i_ac_now_a / 2.0;
}

int DiscretizedNetwork::add_node(std::string name) {
    if (index_.count(name)) throw SimulationError("duplicate node name '" + name + "'");
    const int id = static_cast<int>(names_.size());
    index_[name] = id;
    names_.push_back(std::move(name));
    dirty_ = true;
    return id;
}

int DiscretizedNetwork::node(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw SimulationError("unknown node '" + name + "'");
    return it->second;
}

std::optional<int> DiscretizedNetwork::find_node(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

void DiscretizedNetwork::configure(double dt_s, double u_nom_v, EngineOptions opts) {
    dt_ = dt_s;
    u_nom_ = u_nom_v;
    opts_ = opts;
}

std::size_t DiscretizedNetwork::add_branch(int a, int b, double r, double l) {
    RlBranch br;
    br.a = a;
    br.b = b;
    br.r = r;
    br.l = l;
    branches_.push_back(br);
    dirty_ = true;
    return branches_.size() - 1;
}

std::size_t DiscretizedNetwork::add_capacitor(int a, int b, double c) {
    Capacitor cap;
    cap.a = a;
    cap.b = b;
    cap.c = c;
    capacitors_.push_back(cap);
    dirty_ = true;
    return capacitors_.size() - 1;
}

std::size_t DiscretizedNetwork::add_line(int k, int m, double z, double delay_s) {
    LineSection ln;
    ln.k = k;
    ln.m = m;
    ln.z = z;
    ln.delay_steps = delay_s / dt_;
    if (ln.delay_steps < 1.0) throw SimulationError("line section delay shorter than one time step");
    const auto size = static_cast<std::size_t>(std::floor(ln.delay_steps)) + 2;
    ln.wk.assign(size, 0.0);
    ln.wm.assign(size, 0.0);
    lines_.push_back(std::move(ln));
    dirty_ = true;
    return lines_.size() - 1;
}

std::size_t DiscretizedNetwork::add_injection(int node) {
    injections_.push_back({node, 0.0});
    return injections_.size() - 1;
}

void DiscretizedNetwork::add_cable(const Cable& cable, int node_a, int node_b) {
    const auto& p = cable.params;
    CableModel cm;
    cm.id = cable.id;
    cm.node_a = node_a;
    cm.node_b = node_b;
    const double r_total = p.total_resistance_ohm();
    const double l_total = p.total_inductance_mh() * 1e-3;
    const double c_total = p.c_uf_per_km * 1e-6 * p.length_km;
    const double tau = p.length_km > 0.0 ? p.travel_time_ms() * 1e-3 : 0.0;
    const double r_hf = p.r_hf_ohm_per_km * p.length_km;
    const double tau_hf = p.hf_time_constant_ms * 1e-3;
    const std::string prefix = "cable:" + cable.id + ":";
    cm.r_total = std::max(r_total, 1e-6);

    if (tau / 2.0 < dt_) {
        cm.lumped = true;
        if (p.length_km > 0.0) {
            std::ostringstream os;
            os << "cable " << cable.id << " (" << p.length_km
               << " km) is shorter than two wave steps; using a lumped pi-section";
            warnings_.push_back(os.str());
        }
        const auto br = add_branch(node_a, node_b, cm.r_total, l_total);
        ChainLink link{ChainLink::Kind::Pi, br, capacitors_.size()};
        add_capacitor(node_a, kGround, std::max(c_total / 2.0, 0.0));
        add_capacitor(node_b, kGround, std::max(c_total / 2.0, 0.0));
        cm.chain.push_back(link);
        cm.end_a = {{EndTerm::Kind::Branch, br, -1.0}, {EndTerm::Kind::Capacitor, link.second, -1.0}};
        cm.end_b = {{EndTerm::Kind::Branch, br, 1.0}, {EndTerm::Kind::Capacitor, link.second + 1, -1.0}};
        cables_.push_back(std::move(cm));
        return;
    }

    const double z = p.surge_impedance_ohm();
    // one lumped loss point: series R, then optional R_hf || L_hf
    auto loss_point = [&](int from, int to, double share, const std::string& tag,
                          std::vector<EndTerm>* first_terms, std::vector<EndTerm>* last_terms) {
        const bool hf = r_hf > 0.0 && tau_hf > 0.0;
        const int mid = hf ? add_node(prefix + tag + "hf") : to;
        const auto s = add_branch(from, mid, std::max(share * r_total, 1e-6), 0.0);
        cm.chain.push_back({ChainLink::Kind::Series, s, 0});
        if (first_terms) first_terms->push_back({EndTerm::Kind::Branch, s, -1.0});
        if (hf) {
            const double rh = share * r_hf;
            const auto b1 = add_branch(mid, to, rh, 0.0);
            const auto b2 = add_branch(mid, to, 0.0, rh * tau_hf);
            cm.chain.push_back({ChainLink::Kind::HfPair, b1, b2});
            if (last_terms) {
                last_terms->push_back({EndTerm::Kind::Branch, b1, 1.0});
                last_terms->push_back({EndTerm::Kind::Branch, b2, 1.0});
            }
        } else if (last_terms) {
            last_terms->push_back({EndTerm::Kind::Branch, s, 1.0});
        }
    };

    const int n1 = add_node(prefix + "n1");
    const int n2 = add_node(prefix + "n2");
    const int n3 = add_node(prefix + "n3");
    const int n4 = add_node(prefix + "n4");
    loss_point(node_a, n1, 0.25, "a", &cm.end_a, nullptr);
    const auto l1 = add_line(n1, n2, z, tau / 2.0);
    cm.chain.push_back({ChainLink::Kind::Line, l1, 0});
    loss_point(n2, n3, 0.5, "mid", nullptr, nullptr);
    const auto l2 = add_line(n3, n4, z, tau / 2.0);
    cm.chain.push_back({ChainLink::Kind::Line, l2, 0});
    loss_point(n4, node_b, 0.25, "b", nullptr, &cm.end_b);
    cables_.push_back(std::move(cm));
}

void DiscretizedNetwork::add_converter(const Converter& conv, int terminal) {
    const auto& p = conv.params;
    ConverterModel cm;
    cm.id = conv.id;
    cm.params = p;
    cm.terminal = terminal;
    cm.internal = add_node("conv:" + conv.id + ":int");
    cm.branch = add_branch(cm.internal, terminal, p.equivalent_resistance_ohm(), p.equivalent_inductance_mh() * 1e-3);
    cm.capacitor = add_capacitor(cm.internal, kGround, p.aggregate_capacitance_uf() * 1e-6);
    cm.injection = add_injection(cm.internal);
    cm.u_ref_v = p.u_dc_kv * 1e3;
    cm.droop_w_per_v = p.control == ControlMode::DcVoltageDroop ? 1e3 / p.droop_kv_per_mw : 0.0;
    cm.p_max_w = p.i_ac_max_pu * p.s_mva * 1e6;
    cm.lag_s = opts_.control_lag_ms * 1e-3;
    cm.i_ac_peak_a = p.ac_current_limit_peak_ka() * 1e3;
    cm.ac_peak_per_w = std::sqrt(2.0) / (std::sqrt(3.0) * p.u_ac_kv * 1e3);
    cm.arm_limit_a = p.k_pu * p.i_arm_rated_ka * 1e3;
    converters_.push_back(cm);
}

void DiscretizedNetwork::add_breaker(const Breaker& br, int node_from, int node_to) {
    BreakerModel bm;
    bm.id = br.id;
    bm.params = br.params;
    bm.l_dc_h = br.l_dc_mh * 1e-3;
    bm.node_from = node_from;
    bm.node_to = node_to;
    bm.branch = add_branch(node_from, node_to, opts_.breaker_on_resistance_ohm, bm.l_dc_h);
    bm.clamp_v = br.params.clamp_pu * u_nom_;
    breakers_.push_back(bm);
}

const CableModel& DiscretizedNetwork::cable(const std::string& id) const {
    for (const auto& c : cables_)
        if (c.id == id) return c;
    throw SimulationError("unknown cable '" + id + "'");
}

const ConverterModel& DiscretizedNetwork::converter(const std::string& id) const {
    for (const auto& c : converters_)
        if (c.id == id) return c;
    throw SimulationError("unknown converter '" + id + "'");
}

const BreakerModel& DiscretizedNetwork::breaker(const std::string& id) const {
    for (const auto& b : breakers_)
        if (b.id == id) return b;
    throw SimulationError("unknown breaker '" + id + "'");
}

BreakerModel& DiscretizedNetwork::breaker(const std::string& id) {
    for (auto& b : breakers_)
        if (b.id == id) return b;
    throw SimulationError("unknown breaker '" + id + "'");
}

double DiscretizedNetwork::cable_current_into(const CableModel& c, int bus_node) const {
    const auto& terms = (bus_node == c.node_a) ? c.end_a : c.end_b;
    if (bus_node != c.node_a && bus_node != c.node_b)
        throw SimulationError("cable " + c.id + " is not attached to node " + node_name(bus_node));
    double sum = 0.0;
    for (const auto& t : terms) {
        switch (t.kind) {
            case EndTerm::Kind::Branch: sum += t.sign * branches_[t.index].i; break;
            case EndTerm::Kind::Capacitor: sum += t.sign * capacitors_[t.index].i; break;
            case EndTerm::Kind::LineK: sum += t.sign * lines_[t.index].ik; break;
            case EndTerm::Kind::LineM: sum += t.sign * lines_[t.index].im; break;
        }
    }
    return sum;
}

void DiscretizedNetwork::set_fault(int node) {
    FaultModel f;
    f.node = node;
    fault_ = f;
    dirty_ = true;
}

void DiscretizedNetwork::activate_fault() {
    if (!fault_) throw SimulationError("no fault location configured");
    fault_->active = true;
    dirty_ = true;
}

void DiscretizedNetwork::disable_sources() {
    for (auto& c : converters_) {
        c.zero_sources = true;
        injections_[c.injection].current = 0.0;
    }
}

std::vector<int> DiscretizedNetwork::floating_nodes() const {
    const auto n = names_.size();
    std::vector<std::vector<int>> adj(n);
    std::vector<char> grounded(n, 0);
    auto link = [&](int a, int b) {
        if (a == kGround && b == kGround) return;
        if (a == kGround) {
            grounded[b] = 1;
        } else if (b == kGround) {
            grounded[a] = 1;
        } else {
            adj[a].push_back(b);
            adj[b].push_back(a);
        }
    };
    for (const auto& br : branches_)
        if (!br.open) link(br.a, br.b);
    for (const auto& c : capacitors_)
        if (c.c > 0.0) link(c.a, c.b);
    for (const auto& ln : lines_) {
        link(ln.k, kGround);
        link(ln.m, kGround);
    }
    if (fault_ && fault_->active) link(fault_->node, kGround);
    std::vector<char> seen(n, 0);
    std::queue<int> q;
    for (std::size_t i = 0; i < n; ++i)
        if (grounded[i]) {
            seen[i] = 1;
            q.push(static_cast<int>(i));
        }
    while (!q.empty()) {
        int cur = q.front();
        q.pop();
        for (int nb : adj[cur])
            if (!seen[nb]) {
                seen[nb] = 1;
                q.push(nb);
            }
    }
    std::vector<int> out;
    for (std::size_t i = 0; i < n; ++i)
        if (!seen[i]) out.push_back(static_cast<int>(i));
    return out;
}

void DiscretizedNetwork::refactor() {
    const auto n = static_cast<Eigen::Index>(names_.size());
    g_.setZero(n, n);
    auto stamp = [this](int a, int b, double g) {
        if (a != kGround) g_(a, a) += g;
        if (b != kGround) g_(b, b) += g;
        if (a != kGround && b != kGround) {
            g_(a, b) -= g;
            g_(b, a) -= g;
        }
    };
    for (auto& br : branches_) {
        if (br.open) {
            br.g = 0.0;
            continue;
        }
        br.g = 1.0 / (br.r + 2.0 * br.l / dt_);
        stamp(br.a, br.b, br.g);
    }
    for (auto& c : capacitors_) {
        c.g = 2.0 * c.c / dt_;
        if (c.g > 0.0) stamp(c.a, c.b, c.g);
    }
    for (const auto& ln : lines_) {
        stamp(ln.k, kGround, 1.0 / ln.z);
        stamp(ln.m, kGround, 1.0 / ln.z);
    }
    if (fault_ && fault_->active) stamp(fault_->node, kGround, fault_->g);

    auto floating = floating_nodes();
    if (!floating.empty()) {
        std::ostringstream os;
        os << "singular conductance matrix: floating subnetwork {";
        for (std::size_t i = 0; i < floating.size(); ++i) os << (i ? ", " : "") << names_[floating[i]];
        os << "}";
        throw SimulationError(os.str());
    }
    llt_.compute(g_);
    if (llt_.info() != Eigen::Success) throw SimulationError("conductance matrix is not positive definite");
    if (v_.size() != n) v_ = Eigen::VectorXd::Zero(n);
    rhs_.resize(n);
    dirty_ = false;
}

void DiscretizedNetwork::initialize_steady_state(const std::map<std::string, double>& setpoints_pu) {
    if (dirty_) refactor();
    // DC operating point on the terminal nodes of cables, breakers and converters
    std::map<int, int> local;
    auto idx = [&local](int node) {
        auto it = local.find(node);
        if (it != local.end()) return it->second;
        const int k = static_cast<int>(local.size());
        local[node] = k;
        return k;
    };
    struct Link {
        int a, b;
        double g;
    };
    std::vector<Link> links;
    for (const auto& c : cables_) links.push_back({idx(c.node_a), idx(c.node_b), 1.0 / c.r_total});
    for (const auto& b : breakers_)
        links.push_back({idx(b.node_from), idx(b.node_to), 1.0 / opts_.breaker_on_resistance_ohm});
    for (const auto& c : converters_) idx(c.terminal);
    const int n = static_cast<int>(local.size());

    bool any_droop = false;
    bool any_power = false;
    for (auto& c : converters_) {
        auto it = setpoints_pu.find(c.id);
        const double sp = it == setpoints_pu.end() ? 0.0 : it->second;
        c.p_set_w = c.zero_sources ? 0.0 : sp * c.params.p_mw * 1e6;
        if (c.zero_sources) c.droop_w_per_v = 0.0;
        any_droop = any_droop || c.droop_w_per_v > 0.0;
        any_power = any_power || c.p_set_w != 0.0;
    }
    if (any_power && !any_droop)
        throw SimulationError("infeasible power flow: setpoints are unbalanced and no droop converter balances them");

    auto power_at = [](const ConverterModel& c, double v) {
        double p = c.p_set_w + c.droop_w_per_v * (c.u_ref_v - v);
        return std::clamp(p, -c.p_max_w, c.p_max_w);
    };
    auto dc_current = [&](const ConverterModel& c, double v) {
        const double r = c.params.equivalent_resistance_ohm();
        const double p = power_at(c, v);
        const double disc = v * v + 4.0 * r * p;
        if (disc < 0.0) throw SimulationError("no DC operating point for converter " + c.id);
        return (-v + std::sqrt(disc)) / (2.0 * r);
    };

    Eigen::VectorXd volt = Eigen::VectorXd::Constant(n, u_nom_);
    if (any_power || any_droop) {
        bool converged = false;
        for (int it = 0; it < 100 && !converged; ++it) {
            Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
            Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
            for (const auto& l : links) {
                const double ib = l.g * (volt(l.a) - volt(l.b));
                f(l.a) += ib;
                f(l.b) -= ib;
                jac(l.a, l.a) += l.g;
                jac(l.b, l.b) += l.g;
                jac(l.a, l.b) -= l.g;
                jac(l.b, l.a) -= l.g;
            }
            for (const auto& c : converters_) {
                const int k = local.at(c.terminal);
                const double v = volt(k);
                const double i0 = dc_current(c, v);
                const double h = 1.0;
                const double di = (dc_current(c, v + h) - dc_current(c, v - h)) / (2.0 * h);
                f(k) -= i0;
                jac(k, k) -= di;
            }
            Eigen::VectorXd dv = jac.fullPivLu().solve(-f);
            if (!dv.allFinite()) throw SimulationError("DC power flow failed: singular Jacobian");
            volt += dv;
            converged = dv.cwiseAbs().maxCoeff() < 1e-7 * u_nom_;
        }
        if (!converged) throw SimulationError("DC power flow did not converge");
    }
    auto vdc = [&](int node) { return volt(local.at(node)); };

    v_.setZero(static_cast<Eigen::Index>(names_.size()));
    for (const auto& [node, k] : local) v_(node) = volt(k);

    auto set_branch = [this](std::size_t bi, double i, double e = 0.0) {
        auto& br = branches_[bi];
        br.i = i;
        br.e = e;
        br.e_prev = e;
        br.v = br.r * i + e;
    };
    auto fill_line = [this](std::size_t li, double v, double i_k) {
        auto& ln = lines_[li];
        ln.vk = ln.vm = v;
        ln.ik = i_k;
        ln.im = -i_k;
        std::fill(ln.wk.begin(), ln.wk.end(), v / ln.z + i_k);
        std::fill(ln.wm.begin(), ln.wm.end(), v / ln.z - i_k);
        ln.hk = -(v / ln.z - i_k);
        ln.hm = -(v / ln.z + i_k);
    };

    for (const auto& c : cables_) {
        const double va = vdc(c.node_a);
        const double vb = vdc(c.node_b);
        const double i = (va - vb) / c.r_total;
        double v = va;
        for (const auto& link : c.chain) {
            switch (link.kind) {
                case ChainLink::Kind::Series: {
                    set_branch(link.first, i);
                    v -= branches_[link.first].r * i;
                    if (branches_[link.first].b != kGround) v_(branches_[link.first].b) = v;
                    break;
                }
                case ChainLink::Kind::HfPair:
                    set_branch(link.first, 0.0);
                    set_branch(link.second, i);
                    branches_[link.second].v = 0.0;
                    if (branches_[link.first].b != kGround) v_(branches_[link.first].b) = v;
                    break;
                case ChainLink::Kind::Line:
                    fill_line(link.first, v, i);
                    v_(lines_[link.first].m) = v;
                    break;
                case ChainLink::Kind::Pi: {
                    set_branch(link.first, i);
                    auto& ca = capacitors_[link.second];
                    auto& cb = capacitors_[link.second + 1];
                    ca.v = va;
                    ca.i = 0.0;
                    cb.v = vb;
                    cb.i = 0.0;
                    break;
                }
            }
        }
    }
    for (const auto& b : breakers_) {
        auto& br = branches_[b.branch];
        br.open = false;
        set_branch(b.branch, (vdc(b.node_from) - vdc(b.node_to)) / opts_.breaker_on_resistance_ohm);
    }
    for (auto& c : converters_) {
        const double v = vdc(c.terminal);
        const double i = dc_current(c, v);
        const double e = v + c.params.equivalent_resistance_ohm() * i;
        set_branch(c.branch, i);
        auto& cap = capacitors_[c.capacitor];
        cap.v = e;
        cap.i = 0.0;
        v_(c.internal) = e;
        c.p_ac_w = c.zero_sources ? 0.0 : power_at(c, v);
        c.e_ref_v = e;
        c.i_ac_now_a = std::min(std::abs(c.p_ac_w) * c.ac_peak_per_w, c.i_ac_peak_a);
        c.energy_gain_w_per_v =
            c.zero_sources ? 0.0 : cap.c * e / (opts_.energy_time_constant_ms * 1e-3);
        c.blocked = false;
        injections_[c.injection].current = c.zero_sources ? 0.0 : c.p_ac_w / e;
    }
    time_ = 0.0;
    step_ = 0;
}

void DiscretizedNetwork::step() {
    const double t_next = time_ + dt_;
    // scheduled breaker transitions take effect for the solution at t_next
    for (auto& b : breakers_) {
        if (!b.armed || !b.arrival_s) continue;
        if (b.phase == BreakerPhase::Closed && t_next >= b.trip_s - kTimeEps) b.phase = BreakerPhase::Commutating;
        if (b.phase == BreakerPhase::Commutating && t_next >= b.clamp_s - kTimeEps) {
            auto& br = branches_[b.branch];
            b.direction = sgn(br.i);
            if (b.direction == 0.0) {
                b.phase = BreakerPhase::Open;
                br.open = true;
                br.i = 0.0;
            } else {
                b.phase = BreakerPhase::Clamping;
                br.e = b.direction * b.clamp_v;
                br.r = opts_.breaker_on_resistance_ohm + opts_.varistor_slope_ohm;
            }
            dirty_ = true;
        }
    }
    if (dirty_) refactor();

    rhs_.setZero();
    auto inject = [this](int node, double current) {
        if (node != kGround) rhs_(node) += current;
    };
    for (auto& br : branches_) {
        if (br.open) continue;
        br.hist = br.g * (br.v - br.e_prev - br.e + (2.0 * br.l / dt_ - br.r) * br.i);
        inject(br.a, -br.hist);
        inject(br.b, br.hist);
    }
    for (auto& c : capacitors_) {
        if (c.g <= 0.0) continue;
        c.hist = -(c.g * c.v + c.i);
        inject(c.a, -c.hist);
        inject(c.b, c.hist);
    }
    for (auto& ln : lines_) {
        ln.hk = -ln.delayed(ln.wm);
        ln.hm = -ln.delayed(ln.wk);
        inject(ln.k, -ln.hk);
        inject(ln.m, -ln.hm);
    }
    for (const auto& inj : injections_) inject(inj.node, inj.current);

    v_ = llt_.solve(rhs_);

    for (auto& br : branches_) {
        if (br.open) {
            br.i = 0.0;
            br.v = voltage(br.a) - voltage(br.b);
            continue;
        }
        br.v = voltage(br.a) - voltage(br.b);
        br.i = br.g * br.v + br.hist;
        br.e_prev = br.e;
    }
    for (auto& c : capacitors_) {
        if (c.g <= 0.0) continue;
        c.v = voltage(c.a) - voltage(c.b);
        c.i = c.g * c.v + c.hist;
    }
    for (auto& ln : lines_) {
        ln.vk = voltage(ln.k);
        ln.vm = voltage(ln.m);
        ln.ik = ln.vk / ln.z + ln.hk;
        ln.im = ln.vm / ln.z + ln.hm;
        ln.head = (ln.head + 1) % ln.wk.size();
        ln.wk[ln.head] = ln.vk / ln.z + ln.ik;
        ln.wm[ln.head] = ln.vm / ln.z + ln.im;
    }
    time_ = t_next;
    ++step_;
    check_divergence();
    run_controls();
}

void DiscretizedNetwork::check_divergence() const {
    const double limit = opts_.divergence_factor * u_nom_;
    for (Eigen::Index i = 0; i < v_.size(); ++i) {
        if (!std::isfinite(v_(i)) || std::abs(v_(i)) > limit) {
            std::ostringstream os;
            os << "numerical divergence at step " << step_ << " (t = " << time_ * 1e3 << " ms): node "
               << names_[static_cast<std::size_t>(i)] << " at " << v_(i) * 1e-3 << " kV";
            throw SimulationError(os.str());
        }
    }
}

void DiscretizedNetwork::run_controls() {
    for (auto& c : converters_) {
        auto& br = branches_[c.branch];
        const double i_dc = br.i;
        if (!c.blocked && c.arm_current_estimate(i_dc) > c.arm_limit_a) {
            c.blocked = true;
            c.block_time_s = time_;
            // blocking resistance sized so the interrupted current does not
            // drive the terminal beyond about one per unit
            br.r += u_nom_ / std::max(std::abs(i_dc), 1.0);
            injections_[c.injection].current = 0.0;
            c.p_ac_w = 0.0;
            dirty_ = true;
            continue;
        }
        if (c.blocked || c.zero_sources) {
            injections_[c.injection].current = 0.0;
            continue;
        }
        const double v_term = voltage(c.terminal);
        const double e = capacitors_[c.capacitor].v;
        double p_ref = c.p_set_w + c.droop_w_per_v * (c.u_ref_v - v_term) + c.energy_gain_w_per_v * (c.e_ref_v - e);
        p_ref = std::clamp(p_ref, -c.p_max_w, c.p_max_w);
        const double a = dt_ / (c.lag_s + dt_);
        c.p_ac_w += a * (p_ref - c.p_ac_w);
        c.i_ac_now_a = std::min(std::abs(c.p_ac_w) * c.ac_peak_per_w, c.i_ac_peak_a);
        injections_[c.injection].current = c.p_ac_w / std::max(e, 0.05 * u_nom_);
    }

    for (auto& b : breakers_) {
        if (!b.armed) continue;
        auto& br = branches_[b.branch];
        if (!b.arrival_s && voltage(b.detect_node) < b.detect_threshold_v) {
            b.arrival_s = time_;
            b.trip_s = time_ + b.params.t_relay_ms * 1e-3;
            b.clamp_s = b.trip_s + b.params.t_cb_ms * 1e-3;
        }
        if (b.phase == BreakerPhase::Clamping) {
            const double vi = b.clamp_v + opts_.varistor_slope_ohm * std::abs(br.i);
            b.varistor_energy_j += vi * std::abs(br.i) * dt_;
            if (br.i * b.direction <= 0.0) {
                b.phase = BreakerPhase::Open;
                br.open = true;
                br.i = 0.0;
                br.e = 0.0;
                dirty_ = true;
            }
        }
    }
}

double DiscretizedNetwork::stored_energy() const {
    double w = 0.0;
    for (const auto& br : branches_)
        if (!br.open) w += 0.5 * br.l * br.i * br.i;
    for (const auto& c : capacitors_) w += 0.5 * c.c * c.v * c.v;
    for (const auto& ln : lines_) w += ln.stored_energy(dt_);
    return w;
}

DiscretizedNetwork build_network(const GridModel& model, const DesignScenario& scen,
                                 const std::optional<FaultLocation>& split, const EngineOptions& opts) {
    DiscretizedNetwork net;
    net.configure(scen.dt_us * 1e-6, model.nominal_voltage_kv() * 1e3, opts);
    for (const auto& b : model.buses) net.mark_bus(net.add_node(b.id));

    std::optional<std::string> split_cable;
    double split_km = 0.0;
    if (split && !split->cable.empty()) {
        const auto& c = model.cable(split->cable);
        if (split->bus != c.from && split->bus != c.to)
            throw SimulationError("fault reference bus " + split->bus + " is not an end of cable " + c.id);
        const double len = c.params.length_km;
        split_km = split->bus == c.from ? split->position_km : len - split->position_km;
        if (split_km > 0.0 && split_km < len) split_cable = c.id;
    }
    for (const auto& c : model.cables) {
        const int a = net.node(c.from);
        const int b = net.node(c.to);
        if (split_cable && *split_cable == c.id) {
            const int f = net.add_node("F");
            Cable first = c;
            first.id = c.id + "#a";
            first.params.length_km = split_km;
            Cable second = c;
            second.id = c.id + "#b";
            second.params.length_km = c.params.length_km - split_km;
            net.add_cable(first, a, f);
            net.add_cable(second, f, b);
        } else {
            net.add_cable(c, a, b);
        }
    }
    for (const auto& cv : model.converters) net.add_converter(cv, net.node(cv.bus));
    for (const auto& br : model.breakers) net.add_breaker(br, net.node(br.from), net.node(br.to));
    // factorize once so a floating subnetwork is reported at build time
    net.initialize_steady_state({});
    return net;
}

}  // namespace hvdc::emt
