#pragma once

#include <map>
#include <string>

namespace dseg {

enum class BackboneKind { resnet18, resnet34, resnet50, tiny };
enum class Aggregation { tsa, add, concat };

/// `dual` feeds the image at hr_size and lr_size through the backbone.
/// `single` runs one backbone pass at hr_size and takes the low-resolution
/// roles from the same pyramid (see Encoder).
enum class InputMode { dual, single };

struct ModelConfig {
    BackboneKind backbone = BackboneKind::resnet50;
    bool shared_backbone = true;
    int trunk_channels = 64;
    int structure_channels = 32;
    int hr_size = 1024;
    int lr_size = 256;
    InputMode input_mode = InputMode::dual;
    bool use_dcm = true;
    bool use_hr0 = true;
    bool use_filtering = true;
    Aggregation aggregation = Aggregation::tsa;
    bool use_trunk_decoder = true;
    bool use_structure_decoder = true;

    /// Field-level invariants. Throws std::invalid_argument.
    void validate() const;

    /// Invariants plus the scale arithmetic the decoder wiring needs.
    void validate_buildable() const;

    [[nodiscard]] std::map<std::string, std::string> to_map() const;
    static ModelConfig from_map(const std::map<std::string, std::string>& kv);
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

std::string to_string(BackboneKind b);
std::string to_string(Aggregation a);
std::string to_string(InputMode m);
BackboneKind parse_backbone(const std::string& s);
Aggregation parse_aggregation(const std::string& s);
InputMode parse_input_mode(const std::string& s);

/// Named ablation presets: "default", "no-dcm", "no-trunk-decoder",
/// "no-structure-decoder", "add", "concat", "no-hr0", "no-filtering",
/// "single-input", "non-shared".
ModelConfig apply_preset(ModelConfig base, const std::string& preset);

/// Settings used by the desk-scale tests: tiny backbone at 256/64.
ModelConfig tiny_config();

}  // namespace dseg
