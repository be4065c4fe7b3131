#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "ttml/image.hpp"
#include "ttml/tensor.hpp"

namespace ttml {

// The 11 cloud genera, in the fixed order that defines the class indices.
struct ClassInfo {
    const char* name;
    const char* abbrev;
};

const std::array<ClassInfo, 11>& class_table();
int class_index(const std::string& abbrev);  // -1 if unknown

struct Sample {
    Tensor image;  // (S, S, 3) in [0, 1]
    int label = -1;
    std::string path;
    int orig_width = 0;
    int orig_height = 0;
};

struct Dataset {
    std::vector<Sample> samples;
    int image_size = 256;

    std::array<int64_t, 11> class_counts() const;
    bool empty() const { return samples.empty(); }
    size_t size() const { return samples.size(); }
};

// Ingests an image-folder tree <root>/<Abbrev>/<file>. Every regular file
// must decode (PPM or PNG); images are bilinearly resized to image_size
// square when needed. Samples are ordered lexicographically by path.
// Unknown subdirectories produce a warning and are skipped; a class with no
// images is an error.
Dataset load_dataset(const std::filesystem::path& root, int image_size = 256,
                     std::vector<std::string>* warnings = nullptr);

// Stratified (default) or global 80:20 split; per class the first
// floor(0.8 n) of a seeded shuffle go to train. Subsets keep the original
// sample order.
std::pair<Dataset, Dataset> split_80_20(const Dataset& ds, uint64_t seed,
                                        bool stratified = true,
                                        std::vector<std::string>* warnings = nullptr);

// Writes a synthetic stand-in corpus in the same layout: per class a seeded
// procedural texture with a class-specific color bias and spatial
// frequency, as PPM files. Deterministic per (seed, class, index).
void gen_synthetic(const std::filesystem::path& out_root, int num_per_class, int size,
                   uint64_t seed);

// CSV manifest: path, class index and the pre-resize dimensions.
void write_manifest_csv(const Dataset& ds, std::ostream& os);

}  // namespace ttml
