#include "mov3d/config.h"

#include <charconv>
#include <functional>
#include <set>

#include "mov3d/error.h"
#include "mov3d/io.h"

namespace mov3d {

std::string_view data_kind_name(DataKind k) {
    switch (k) {
        case DataKind::scene: return "scene";
        case DataKind::single: return "single";
        case DataKind::ablation: return "ablation";
    }
    return "scene";
}

namespace {

struct BadValue {
    std::string what;
};

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view v, const char* kind) {
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) throw BadValue{std::string("expected ") + kind};
    return out;
}

std::size_t parse_count(std::string_view v) { return parse_number<std::size_t>(v, "a non-negative integer"); }

double parse_real(std::string_view v) { return parse_number<double>(v, "a number"); }

std::string fmt_real(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return {buf, r.ptr};
}

template <typename E>
E parse_enum(std::string_view v, std::optional<E> (*parse)(std::string_view), const char* kind) {
    auto e = parse(v);
    if (!e) throw BadValue{std::string("unknown ") + kind + " '" + std::string(v) + "'"};
    return *e;
}

std::optional<DataKind> parse_data_kind(std::string_view s) {
    for (DataKind k : {DataKind::scene, DataKind::single, DataKind::ablation}) {
        if (s == data_kind_name(k)) return k;
    }
    return std::nullopt;
}

std::optional<SegmentMode> parse_segment(std::string_view s) {
    if (s == "single") return SegmentMode::single;
    if (s == "multi") return SegmentMode::multi;
    return std::nullopt;
}

std::vector<double> parse_thresholds(std::string_view v) {
    std::vector<double> out;
    while (!v.empty()) {
        const auto comma = v.find(',');
        out.push_back(parse_real(trim(v.substr(0, comma))));
        if (out.back() <= 0.0 || out.back() >= 1.0) throw BadValue{"thresholds must lie in (0, 1)"};
        if (comma == std::string_view::npos) break;
        v.remove_prefix(comma + 1);
    }
    if (out.empty()) throw BadValue{"expected a comma-separated list"};
    return out;
}

struct Key {
    std::string name;
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

Key split_key(const char* name, std::optional<Split> RunConfig::*field) {
    return {name,
            [field](RunConfig& c, std::string_view v) {
                if (v == "all") {
                    (c.*field).reset();
                    return;
                }
                for (Split s : {Split::train, Split::val, Split::test}) {
                    if (v == split_name(s)) {
                        c.*field = s;
                        return;
                    }
                }
                throw BadValue{"unknown split '" + std::string(v) + "'"};
            },
            [field](const RunConfig& c) {
                return c.*field ? std::string(split_name(*(c.*field))) : std::string("all");
            }};
}

#define COUNT_KEY(name, field)                                                   \
    Key {                                                                        \
        name, [](RunConfig& c, std::string_view v) { c.field = parse_count(v); }, \
            [](const RunConfig& c) { return std::to_string(c.field); }          \
    }
#define REAL_KEY(name, field)                                                   \
    Key {                                                                       \
        name, [](RunConfig& c, std::string_view v) { c.field = parse_real(v); }, \
            [](const RunConfig& c) { return fmt_real(c.field); }               \
    }
#define PATH_KEY(name, field)                                                       \
    Key {                                                                           \
        name, [](RunConfig& c, std::string_view v) { c.field = std::string(v); },  \
            [](const RunConfig& c) { return c.field.string(); }                    \
    }

const std::vector<Key>& keys() {
    static const std::vector<Key> table = {
        {"seed", [](RunConfig& c, std::string_view v) { c.seed = parse_number<std::uint64_t>(v, "an integer"); },
         [](const RunConfig& c) { return std::to_string(c.seed); }},
        {"data_kind", [](RunConfig& c, std::string_view v) { c.data_kind = parse_enum(v, parse_data_kind, "data kind"); },
         [](const RunConfig& c) { return std::string(data_kind_name(c.data_kind)); }},
        COUNT_KEY("samples", samples),
        COUNT_KEY("objects", objects),
        COUNT_KEY("frames", frames),
        COUNT_KEY("window_stride", window_stride),
        PATH_KEY("data_dir", data_dir),
        PATH_KEY("pretrained", pretrained),
        PATH_KEY("checkpoint", checkpoint),
        PATH_KEY("sample", sample),
        PATH_KEY("predictions", predictions),
        PATH_KEY("audio", audio),
        {"variant", [](RunConfig& c, std::string_view v) { c.model.variant = parse_enum(v, parse_variant, "variant"); },
         [](const RunConfig& c) { return std::string(variant_name(c.model.variant)); }},
        {"fusion", [](RunConfig& c, std::string_view v) { c.model.fusion.mode = parse_enum(v, parse_fusion, "fusion"); },
         [](const RunConfig& c) { return std::string(fusion_name(c.model.fusion.mode)); }},
        COUNT_KEY("fused_dim", model.fusion.fused_dim),
        COUNT_KEY("mfb_factor", model.fusion.mfb_factor),
        COUNT_KEY("batch_size", train.batch_size),
        COUNT_KEY("ae_epochs", train.ae_epochs),
        REAL_KEY("ae_lr", train.ae_lr),
        COUNT_KEY("stage1_epochs", train.stage1_epochs),
        REAL_KEY("stage1_lr", train.stage1_lr),
        COUNT_KEY("stage2_epochs", train.stage2_epochs),
        REAL_KEY("stage2_lr", train.stage2_lr),
        REAL_KEY("material_weight", train.material_weight),
        COUNT_KEY("eval_every", train.eval_every),
        {"thresholds", [](RunConfig& c, std::string_view v) { c.train.thresholds = parse_thresholds(v); },
         [](const RunConfig& c) {
             std::string s;
             for (double t : c.train.thresholds) s += (s.empty() ? "" : ",") + fmt_real(t);
             return s;
         }},
        split_key("train_split", &RunConfig::train_split),
        split_key("split", &RunConfig::split),
        {"material", [](RunConfig& c, std::string_view v) { c.material = parse_enum(v, parse_material, "material"); },
         [](const RunConfig& c) { return std::string(material_name(c.material)); }},
        {"shape", [](RunConfig& c, std::string_view v) { c.shape = parse_enum(v, parse_shape, "shape"); },
         [](const RunConfig& c) { return std::string(shape_name(c.shape)); }},
        REAL_KEY("size_scale", size_scale),
        REAL_KEY("duration", duration),
        REAL_KEY("gain", gain),
        {"segment", [](RunConfig& c, std::string_view v) { c.segment = parse_enum(v, parse_segment, "segment mode"); },
         [](const RunConfig& c) { return std::string(c.segment == SegmentMode::single ? "single" : "multi"); }},
    };
    return table;
}

#undef COUNT_KEY
#undef REAL_KEY
#undef PATH_KEY

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& k : keys()) out.push_back(k.name);
        return out;
    }();
    return names;
}

RunConfig parse_config(std::string_view text) {
    RunConfig cfg;
    std::set<std::string, std::less<>> seen;
    int line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigParseError("expected key=value", line_no);
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        const Key* entry = nullptr;
        for (const auto& k : keys()) {
            if (k.name == key) entry = &k;
        }
        if (!entry) throw ConfigParseError("unknown key '" + std::string(key) + "'", line_no);
        if (!seen.insert(std::string(key)).second) {
            throw ConfigParseError("key '" + std::string(key) + "' given twice", line_no);
        }
        try {
            entry->set(cfg, value);
        } catch (const BadValue& e) {
            throw ConfigParseError(std::string(key) + ": " + e.what, line_no);
        }
    }
    try {
        cfg.model.validate();
    } catch (const ConfigurationError& e) {
        throw ConfigParseError(e.what(), 0);
    }
    return cfg;
}

RunConfig read_config(const std::filesystem::path& path) { return parse_config(read_text(path)); }

std::string format_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& k : keys()) out += k.name + "=" + k.get(cfg) + "\n";
    return out;
}

}  // namespace mov3d
