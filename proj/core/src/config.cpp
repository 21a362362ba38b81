#include "qsync/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "qsync/io.hpp"

namespace qsync {

namespace {

using nlohmann::json;


[[noreturn]] void bad_key(const std::string& where, const std::string& key) {
    const std::string path = where.empty() ? key : where + "." + key;
    throw std::invalid_argument("unknown config key \"" + path + "\"");
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* a : allowed) {
            if (it.key() == a) {
                known = true;
                break;
            }
        }
        if (!known) bad_key(where, it.key());
    }
}

const json* find(const json& obj, const char* key) {
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

double num(const json& obj, const char* key, double dflt, const std::string& where) {
    const json* v = find(obj, key);
    if (!v) return dflt;
    if (!v->is_number()) {
        throw std::invalid_argument("config key \"" + where + "." + key + "\" must be a number");
    }
    return v->get<double>();
}

int64_t inum(const json& obj, const char* key, int64_t dflt, const std::string& where) {
    const json* v = find(obj, key);
    if (!v) return dflt;
    if (!v->is_number_integer()) {
        throw std::invalid_argument("config key \"" + where + "." + key +
                                    "\" must be an integer");
    }
    return v->get<int64_t>();
}

uint64_t unum(const json& obj, const char* key, uint64_t dflt, const std::string& where) {
    const json* v = find(obj, key);
    if (!v) return dflt;
    if (!v->is_number_unsigned()) {
        throw std::invalid_argument("config key \"" + where + "." + key +
                                    "\" must be a non-negative integer");
    }
    return v->get<uint64_t>();
}

bool flag(const json& obj, const char* key, bool dflt, const std::string& where) {
    const json* v = find(obj, key);
    if (!v) return dflt;
    if (!v->is_boolean()) {
        throw std::invalid_argument("config key \"" + where + "." + key + "\" must be a boolean");
    }
    return v->get<bool>();
}

SourceDetectorModel parse_source(const json& obj) {
    static const char* where = "source";
    check_keys(obj,
               {"brightness_cps", "sigma_c_ps", "sigma_det_ps", "sigma_ttm_ps", "eta_a", "eta_b",
                "dc_a_cps", "dc_b_cps", "e0", "ttm_resolution_ps"},
               where);
    SourceDetectorModel s;
    s.brightness_cps = num(obj, "brightness_cps", s.brightness_cps, where);
    s.coherence_sigma_ps = num(obj, "sigma_c_ps", s.coherence_sigma_ps, where);
    s.det_sigma_ps = num(obj, "sigma_det_ps", s.det_sigma_ps, where);
    s.ttm_sigma_ps = num(obj, "sigma_ttm_ps", s.ttm_sigma_ps, where);
    s.eta_a = num(obj, "eta_a", s.eta_a, where);
    s.eta_b = num(obj, "eta_b", s.eta_b, where);
    s.dc_a_cps = num(obj, "dc_a_cps", s.dc_a_cps, where);
    s.dc_b_cps = num(obj, "dc_b_cps", s.dc_b_cps, where);
    s.e0 = num(obj, "e0", s.e0, where);
    s.ttm_resolution_ps = inum(obj, "ttm_resolution_ps", s.ttm_resolution_ps, where);
    return s;
}

ClockModel parse_clock(const json& obj, const std::string& where) {
    check_keys(obj,
               {"offset_ps", "drift_ps_per_s", "drift_accel_ps_per_ms2", "osc_frac_error",
                "sigma_pps_ps"},
               where);
    ClockModel c;
    c.offset_ps = inum(obj, "offset_ps", c.offset_ps, where);
    c.drift_ps_per_s = num(obj, "drift_ps_per_s", c.drift_ps_per_s, where);
    c.drift_accel_ps_per_ms2 = num(obj, "drift_accel_ps_per_ms2", c.drift_accel_ps_per_ms2, where);
    c.osc_frac_error = num(obj, "osc_frac_error", c.osc_frac_error, where);
    c.pps_sigma_ps = num(obj, "sigma_pps_ps", c.pps_sigma_ps, where);
    return c;
}

ChannelState parse_channel(const json& obj) {
    static const char* where = "channel";
    check_keys(obj, {"base_delay_ps", "delay_rate_ps_per_s", "delay_accel_ps_per_ms2", "loss_db"},
               where);
    ChannelState c;
    c.base_delay_ps = inum(obj, "base_delay_ps", c.base_delay_ps, where);
    c.delay_rate_ps_per_s = num(obj, "delay_rate_ps_per_s", c.delay_rate_ps_per_s, where);
    c.delay_accel_ps_per_ms2 = num(obj, "delay_accel_ps_per_ms2", c.delay_accel_ps_per_ms2, where);
    c.loss_db = num(obj, "loss_db", c.loss_db, where);
    return c;
}

SyncConfig parse_sync(const json& obj) {
    static const char* where = "sync";
    check_keys(obj,
               {"align_window_s", "sub_blocks", "tsec_enabled", "tau_w_scale", "tau_w_fixed_ps",
                "data_block_ps", "coarse_bins", "coarse_bin_ps", "coarse_offset_bins",
                "fine_bins", "fine_bin_ps", "fine_offset_bins", "sigma_tsec_target_ps",
                "gamma_ps_per_ms2", "min_pairs_per_slice", "anchor"},
               where);
    SyncConfig s;
    s.align_window_s = static_cast<int>(inum(obj, "align_window_s", s.align_window_s, where));
    s.sub_blocks = static_cast<int>(inum(obj, "sub_blocks", s.sub_blocks, where));
    s.tsec_enabled = flag(obj, "tsec_enabled", s.tsec_enabled, where);
    s.tau_w_scale = num(obj, "tau_w_scale", s.tau_w_scale, where);
    s.tau_w_fixed_ps = inum(obj, "tau_w_fixed_ps", s.tau_w_fixed_ps, where);
    s.data_block_ps = inum(obj, "data_block_ps", s.data_block_ps, where);
    s.coarse_hist.n_bins = inum(obj, "coarse_bins", s.coarse_hist.n_bins, where);
    s.coarse_hist.bin_width_ps = inum(obj, "coarse_bin_ps", s.coarse_hist.bin_width_ps, where);
    s.coarse_hist.offset_bins = inum(obj, "coarse_offset_bins", s.coarse_hist.offset_bins, where);
    s.fine_hist.n_bins = inum(obj, "fine_bins", s.fine_hist.n_bins, where);
    s.fine_hist.bin_width_ps = inum(obj, "fine_bin_ps", s.fine_hist.bin_width_ps, where);
    s.fine_hist.offset_bins = inum(obj, "fine_offset_bins", s.fine_hist.offset_bins, where);
    s.sigma_tsec_target_ps = num(obj, "sigma_tsec_target_ps", s.sigma_tsec_target_ps, where);
    s.gamma_ps_per_ms2 = num(obj, "gamma_ps_per_ms2", s.gamma_ps_per_ms2, where);
    s.min_pairs_per_slice =
        unum(obj, "min_pairs_per_slice", s.min_pairs_per_slice, where);
    if (const json* v = find(obj, "anchor")) {
        if (!v->is_string()) {
            throw std::invalid_argument("config key \"sync.anchor\" must be a string");
        }
        const std::string a = v->get<std::string>();
        if (a == "center") {
            s.anchor = NodeAnchor::Center;
        } else if (a == "right") {
            s.anchor = NodeAnchor::RightBoundary;
        } else {
            throw std::invalid_argument("config key \"sync.anchor\" must be center or right");
        }
    }
    return s;
}

OpticalLink parse_link(const json& obj) {
    static const char* where = "link";
    check_keys(obj,
               {"wavelength_m", "d_t_m", "d_r_m", "r0_m", "opd_rms_m", "sigma_point_rad",
                "tau_ext", "zenith_rad"},
               where);
    OpticalLink l;
    l.wavelength_m = num(obj, "wavelength_m", l.wavelength_m, where);
    l.d_t_m = num(obj, "d_t_m", l.d_t_m, where);
    l.d_r_m = num(obj, "d_r_m", l.d_r_m, where);
    l.r0_m = num(obj, "r0_m", l.r0_m, where);
    l.opd_rms_m = num(obj, "opd_rms_m", l.opd_rms_m, where);
    l.sigma_point_rad = num(obj, "sigma_point_rad", l.sigma_point_rad, where);
    l.tau_ext = num(obj, "tau_ext", l.tau_ext, where);
    l.zenith_rad = num(obj, "zenith_rad", l.zenith_rad, where);
    return l;
}

}  // namespace

RunConfig config_from_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw std::invalid_argument("config root must be an object");
    check_keys(root,
               {"duration_s", "seed", "error_corr_f", "pol_efficiency", "sift_fraction",
                "source", "clock_a", "clock_b", "channel", "sync", "link"},
               "");

    RunConfig cfg;
    cfg.duration_s = num(root, "duration_s", cfg.duration_s, "<root>");
    cfg.seed = unum(root, "seed", cfg.seed, "<root>");
    cfg.error_corr_f = num(root, "error_corr_f", cfg.error_corr_f, "<root>");
    cfg.pol_efficiency = num(root, "pol_efficiency", cfg.pol_efficiency, "<root>");
    cfg.sift_fraction = num(root, "sift_fraction", cfg.sift_fraction, "<root>");
    if (const json* v = find(root, "source")) cfg.source = parse_source(*v);
    if (const json* v = find(root, "clock_a")) cfg.clock_a = parse_clock(*v, "clock_a");
    if (const json* v = find(root, "clock_b")) cfg.clock_b = parse_clock(*v, "clock_b");
    if (const json* v = find(root, "channel")) cfg.channel = parse_channel(*v);
    if (const json* v = find(root, "sync")) cfg.sync = parse_sync(*v);
    if (const json* v = find(root, "link")) cfg.link = parse_link(*v);
    validate(cfg);
    return cfg;
}

std::string to_json(const RunConfig& cfg) {
    json root;
    root["duration_s"] = cfg.duration_s;
    root["seed"] = cfg.seed;
    root["error_corr_f"] = cfg.error_corr_f;
    root["pol_efficiency"] = cfg.pol_efficiency;
    root["sift_fraction"] = cfg.sift_fraction;

    json& src = root["source"];
    src["brightness_cps"] = cfg.source.brightness_cps;
    src["sigma_c_ps"] = cfg.source.coherence_sigma_ps;
    src["sigma_det_ps"] = cfg.source.det_sigma_ps;
    src["sigma_ttm_ps"] = cfg.source.ttm_sigma_ps;
    src["eta_a"] = cfg.source.eta_a;
    src["eta_b"] = cfg.source.eta_b;
    src["dc_a_cps"] = cfg.source.dc_a_cps;
    src["dc_b_cps"] = cfg.source.dc_b_cps;
    src["e0"] = cfg.source.e0;
    src["ttm_resolution_ps"] = cfg.source.ttm_resolution_ps;

    const auto dump_clock = [](const ClockModel& c) {
        json j;
        j["offset_ps"] = c.offset_ps;
        j["drift_ps_per_s"] = c.drift_ps_per_s;
        j["drift_accel_ps_per_ms2"] = c.drift_accel_ps_per_ms2;
        j["osc_frac_error"] = c.osc_frac_error;
        j["sigma_pps_ps"] = c.pps_sigma_ps;
        return j;
    };
    root["clock_a"] = dump_clock(cfg.clock_a);
    root["clock_b"] = dump_clock(cfg.clock_b);

    json& ch = root["channel"];
    ch["base_delay_ps"] = cfg.channel.base_delay_ps;
    ch["delay_rate_ps_per_s"] = cfg.channel.delay_rate_ps_per_s;
    ch["delay_accel_ps_per_ms2"] = cfg.channel.delay_accel_ps_per_ms2;
    ch["loss_db"] = cfg.channel.loss_db;

    json& sy = root["sync"];
    sy["align_window_s"] = cfg.sync.align_window_s;
    sy["sub_blocks"] = cfg.sync.sub_blocks;
    sy["tsec_enabled"] = cfg.sync.tsec_enabled;
    sy["tau_w_scale"] = cfg.sync.tau_w_scale;
    sy["tau_w_fixed_ps"] = cfg.sync.tau_w_fixed_ps;
    sy["data_block_ps"] = cfg.sync.data_block_ps;
    sy["coarse_bins"] = cfg.sync.coarse_hist.n_bins;
    sy["coarse_bin_ps"] = cfg.sync.coarse_hist.bin_width_ps;
    sy["coarse_offset_bins"] = cfg.sync.coarse_hist.offset_bins;
    sy["fine_bins"] = cfg.sync.fine_hist.n_bins;
    sy["fine_bin_ps"] = cfg.sync.fine_hist.bin_width_ps;
    sy["fine_offset_bins"] = cfg.sync.fine_hist.offset_bins;
    sy["sigma_tsec_target_ps"] = cfg.sync.sigma_tsec_target_ps;
    sy["gamma_ps_per_ms2"] = cfg.sync.gamma_ps_per_ms2;
    sy["min_pairs_per_slice"] = cfg.sync.min_pairs_per_slice;
    sy["anchor"] = cfg.sync.anchor == NodeAnchor::Center ? "center" : "right";

    json& lk = root["link"];
    lk["wavelength_m"] = cfg.link.wavelength_m;
    lk["d_t_m"] = cfg.link.d_t_m;
    lk["d_r_m"] = cfg.link.d_r_m;
    lk["r0_m"] = cfg.link.r0_m;
    lk["opd_rms_m"] = cfg.link.opd_rms_m;
    lk["sigma_point_rad"] = cfg.link.sigma_point_rad;
    lk["tau_ext"] = cfg.link.tau_ext;
    lk["zenith_rad"] = cfg.link.zenith_rad;

    return root.dump(2) + "\n";
}

RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config: " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    try {
        return config_from_json(ss.str());
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

void save_config(const std::string& path, const RunConfig& cfg) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << to_json(cfg);
    if (!os) throw std::runtime_error("write failed: " + path);
}

std::string config_hash(const RunConfig& cfg) { return hex64(fnv1a64(to_json(cfg))); }

void validate(const RunConfig& cfg) {
    if (cfg.duration_s <= 0.0) throw std::invalid_argument("duration_s must be positive");
    if (cfg.error_corr_f < 1.0) {
        throw std::invalid_argument("error_corr_f cannot beat the Shannon limit (minimum 1)");
    }
    if (cfg.pol_efficiency < 0.0 || cfg.pol_efficiency > 1.0) {
        throw std::invalid_argument("pol_efficiency must lie in [0, 1]");
    }
    if (cfg.sift_fraction <= 0.0 || cfg.sift_fraction > 1.0) {
        throw std::invalid_argument("sift_fraction must lie in (0, 1]");
    }
    cfg.source.validate();
    if (cfg.channel.loss_db < 0.0) throw std::invalid_argument("channel.loss_db cannot be negative");
    if (cfg.clock_a.pps_sigma_ps < 0.0 || cfg.clock_b.pps_sigma_ps < 0.0) {
        throw std::invalid_argument("sigma_pps_ps cannot be negative");
    }
    if (cfg.sync.align_window_s < 1) {
        throw std::invalid_argument("sync.align_window_s must be at least 1");
    }
    if (cfg.sync.data_block_ps <= 0) {
        throw std::invalid_argument("sync.data_block_ps must be positive");
    }
    if (cfg.link.wavelength_m <= 0.0 || cfg.link.d_t_m <= 0.0 || cfg.link.d_r_m <= 0.0 ||
        cfg.link.r0_m <= 0.0) {
        throw std::invalid_argument("link geometry must be positive");
    }
}

}  // namespace qsync
