#include "dseg/model_config.hpp"

#include <stdexcept>

#include "dseg/kv_config.hpp"

namespace dseg {

namespace {
void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument("ModelConfig: " + msg);
}
}  // namespace

std::string to_string(BackboneKind b) {
    switch (b) {
        case BackboneKind::resnet18: return "18";
        case BackboneKind::resnet34: return "34";
        case BackboneKind::resnet50: return "50";
        case BackboneKind::tiny: return "tiny";
    }
    return "?";
}

std::string to_string(Aggregation a) {
    switch (a) {
        case Aggregation::tsa: return "tsa";
        case Aggregation::add: return "add";
        case Aggregation::concat: return "concat";
    }
    return "?";
}

std::string to_string(InputMode m) { return m == InputMode::dual ? "dual" : "single"; }

BackboneKind parse_backbone(const std::string& s) {
    if (s == "18" || s == "resnet18") return BackboneKind::resnet18;
    if (s == "34" || s == "resnet34") return BackboneKind::resnet34;
    if (s == "50" || s == "resnet50") return BackboneKind::resnet50;
    if (s == "tiny") return BackboneKind::tiny;
    throw std::invalid_argument("unknown backbone '" + s + "' (expected 18, 34, 50 or tiny)");
}

Aggregation parse_aggregation(const std::string& s) {
    if (s == "tsa") return Aggregation::tsa;
    if (s == "add") return Aggregation::add;
    if (s == "concat") return Aggregation::concat;
    throw std::invalid_argument("unknown aggregation '" + s + "' (expected tsa, add or concat)");
}

InputMode parse_input_mode(const std::string& s) {
    if (s == "dual") return InputMode::dual;
    if (s == "single") return InputMode::single;
    throw std::invalid_argument("unknown input_mode '" + s + "' (expected dual or single)");
}

void ModelConfig::validate() const {
    require(trunk_channels > 0 && structure_channels > 0, "channel widths must be positive");
    require(hr_size > 0 && lr_size > 0, "input sizes must be positive");
    require(hr_size % 32 == 0 && lr_size % 32 == 0, "input sizes must be divisible by 32");
    require(hr_size % lr_size == 0, "hr_size must be an integer multiple of lr_size");
    require(use_trunk_decoder || use_structure_decoder, "disabling both decoders is invalid");
}

void ModelConfig::validate_buildable() const {
    validate();
    if (input_mode == InputMode::dual) {
        require(hr_size == 4 * lr_size,
                "dual-input wiring needs hr_size = 4 * lr_size so that the trunk and structure "
                "groups form doubling chains (got " +
                    std::to_string(hr_size) + "/" + std::to_string(lr_size) + ")");
    } else {
        require(hr_size % 128 == 0, "single-input wiring needs hr_size divisible by 128");
    }
}

std::map<std::string, std::string> ModelConfig::to_map() const {
    return {
        {"backbone", to_string(backbone)},
        {"shared_backbone", kv::format_bool(shared_backbone)},
        {"trunk_channels", std::to_string(trunk_channels)},
        {"structure_channels", std::to_string(structure_channels)},
        {"hr_size", std::to_string(hr_size)},
        {"lr_size", std::to_string(lr_size)},
        {"input_mode", to_string(input_mode)},
        {"use_dcm", kv::format_bool(use_dcm)},
        {"use_hr0", kv::format_bool(use_hr0)},
        {"use_filtering", kv::format_bool(use_filtering)},
        {"aggregation", to_string(aggregation)},
        {"use_trunk_decoder", kv::format_bool(use_trunk_decoder)},
        {"use_structure_decoder", kv::format_bool(use_structure_decoder)},
    };
}

ModelConfig ModelConfig::from_map(const std::map<std::string, std::string>& kv) {
    ModelConfig c;
    kv::Reader r(kv);
    c.backbone = parse_backbone(r.get_string("backbone", to_string(c.backbone)));
    c.shared_backbone = r.get_bool("shared_backbone", c.shared_backbone);
    c.trunk_channels = r.get_int("trunk_channels", c.trunk_channels);
    c.structure_channels = r.get_int("structure_channels", c.structure_channels);
    c.hr_size = r.get_int("hr_size", c.hr_size);
    c.lr_size = r.get_int("lr_size", c.lr_size);
    c.input_mode = parse_input_mode(r.get_string("input_mode", to_string(c.input_mode)));
    c.use_dcm = r.get_bool("use_dcm", c.use_dcm);
    c.use_hr0 = r.get_bool("use_hr0", c.use_hr0);
    c.use_filtering = r.get_bool("use_filtering", c.use_filtering);
    c.aggregation = parse_aggregation(r.get_string("aggregation", to_string(c.aggregation)));
    c.use_trunk_decoder = r.get_bool("use_trunk_decoder", c.use_trunk_decoder);
    c.use_structure_decoder = r.get_bool("use_structure_decoder", c.use_structure_decoder);
    return c;
}

ModelConfig apply_preset(ModelConfig c, const std::string& preset) {
    if (preset == "default") return c;
    if (preset == "no-dcm") c.use_dcm = false;
    else if (preset == "no-trunk-decoder") c.use_trunk_decoder = false;
    else if (preset == "no-structure-decoder") c.use_structure_decoder = false;
    else if (preset == "add") c.aggregation = Aggregation::add;
    else if (preset == "concat") c.aggregation = Aggregation::concat;
    else if (preset == "no-hr0") c.use_hr0 = false;
    else if (preset == "no-filtering") c.use_filtering = false;
    else if (preset == "single-input") c.input_mode = InputMode::single;
    else if (preset == "non-shared") c.shared_backbone = false;
    else throw std::invalid_argument("unknown preset '" + preset + "'");
    return c;
}

ModelConfig tiny_config() {
    ModelConfig c;
    c.backbone = BackboneKind::tiny;
    c.hr_size = 256;
    c.lr_size = 64;
    return c;
}

}  // namespace dseg
