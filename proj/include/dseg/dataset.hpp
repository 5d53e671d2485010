#pragma once

// Dataset discovery and sample loading.
//
// Two layouts are accepted: a directory (or file) with a `manifest.json` as
// written by make_synthetic, and the `im/` + `gt/` layout of the public
// dichotomous-segmentation benchmark, where images `im/<id>.jpg|png` pair
// with masks `gt/<id>.png`. Optional `trunk/` and `struct/` directories hold
// precomputed decoupled labels under the same ids.

#include <optional>
#include <string>
#include <vector>

#include "dseg/image.hpp"
#include "dseg/labels.hpp"

namespace dseg {

/// Environment variable consulted for relative dataset paths that do not exist locally.
inline constexpr const char* kDataRootEnv = "DSEG_DATA_ROOT";

struct SampleRecord {
    std::string id;
    std::string image_path;
    std::string mask_path;
    std::string trunk_path;      // empty when absent
    std::string structure_path;  // empty when absent
};

struct Dataset {
    std::string root;
    std::vector<SampleRecord> samples;
    [[nodiscard]] std::size_t size() const { return samples.size(); }
};

/// Resolves `path`: as given if it exists, otherwise under $DSEG_DATA_ROOT.
std::string resolve_data_path(const std::string& path);

/// Throws std::runtime_error when the layout is not recognised or a listed file is missing.
Dataset load_dataset(const std::string& path);

/// An image and its binary mask at a common size.
struct Sample {
    std::string id;
    RgbImage image;
    Mask mask;
};

/// Reads one record and resizes image and mask to side x side (mask
/// resampled bilinearly, then thresholded at 0.5).
Sample load_sample(const SampleRecord& rec, int side);

/// Checks stored trunk/structure labels against their mask for every record
/// that has them. Returns the ids that fail.
std::vector<std::string> verify_dataset_labels(const Dataset& ds);

/// Mask resampling shared by loading and augmentation.
Mask resize_mask(const Mask& m, int h, int w);

}  // namespace dseg
