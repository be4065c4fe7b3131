#include "ttml/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "ttml/rng.hpp"

namespace ttml {

const std::array<ClassInfo, 11>& class_table() {
    static const std::array<ClassInfo, 11> table = {{
        {"Altocumulus", "Ac"},
        {"Altostratus", "As"},
        {"Cumulonimbus", "Cb"},
        {"Cirrocumulus", "Cc"},
        {"Cirrus", "Ci"},
        {"Cirrostratus", "Cs"},
        {"Contrail", "Ct"},
        {"Cumulus", "Cu"},
        {"Nimbostratus", "Ns"},
        {"Stratocumulus", "Sc"},
        {"Stratus", "St"},
    }};
    return table;
}

int class_index(const std::string& abbrev) {
    const auto& table = class_table();
    for (size_t i = 0; i < table.size(); ++i)
        if (abbrev == table[i].abbrev) return int(i);
    return -1;
}

std::array<int64_t, 11> Dataset::class_counts() const {
    std::array<int64_t, 11> counts{};
    for (const auto& s : samples) ++counts[size_t(s.label)];
    return counts;
}

namespace {

std::vector<uint8_t> read_file(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary | std::ios::ate);
    if (!is) throw DataError("cannot open file: " + p.string());
    const auto len = is.tellg();
    is.seekg(0);
    std::vector<uint8_t> bytes(static_cast<size_t>(len));
    is.read(reinterpret_cast<char*>(bytes.data()), len);
    if (!is) throw DataError("cannot read file: " + p.string());
    return bytes;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& root, int image_size,
                     std::vector<std::string>* warnings) {
    if (image_size < 1) throw UsageError("load_dataset: image_size must be positive");
    if (!std::filesystem::is_directory(root))
        throw DataError("load_dataset: not a directory: " + root.string());

    Dataset ds;
    ds.image_size = image_size;
    std::array<bool, 11> present{};
    for (const auto& entry : std::filesystem::directory_iterator(root)) {
        if (!entry.is_directory()) continue;
        const std::string abbrev = entry.path().filename().string();
        const int label = class_index(abbrev);
        if (label < 0) {
            if (warnings)
                warnings->push_back("unknown subdirectory '" + abbrev + "' skipped");
            continue;
        }
        present[size_t(label)] = true;
        for (const auto& file : std::filesystem::directory_iterator(entry.path())) {
            if (!file.is_regular_file()) continue;
            Sample s;
            s.path = file.path().string();
            s.label = label;
            ImageU8 img;
            try {
                img = decode_image_bytes(read_file(file.path()));
            } catch (const DataError& e) {
                throw DataError("undecodable file " + s.path + ": " + e.what());
            }
            s.orig_width = img.width;
            s.orig_height = img.height;
            Tensor t = image_to_tensor(img);
            if (img.width != image_size || img.height != image_size)
                t = resize_bilinear(t, image_size, image_size);
            s.image = std::move(t);
            ds.samples.push_back(std::move(s));
        }
    }
    std::sort(ds.samples.begin(), ds.samples.end(),
              [](const Sample& a, const Sample& b) { return a.path < b.path; });
    if (ds.samples.empty()) throw DataError("load_dataset: no images under " + root.string());

    // A class directory that exists but yields nothing is an error; an
    // absent directory only warns, so partial trees remain loadable.
    const auto counts = ds.class_counts();
    for (size_t c = 0; c < counts.size(); ++c) {
        if (present[c] && counts[c] == 0)
            throw DataError("load_dataset: class '" + std::string(class_table()[c].abbrev) +
                            "' has no images under " + root.string());
        if (!present[c] && warnings)
            warnings->push_back("class directory '" + std::string(class_table()[c].abbrev) +
                                "' missing");
    }
    return ds;
}

std::pair<Dataset, Dataset> split_80_20(const Dataset& ds, uint64_t seed, bool stratified,
                                        std::vector<std::string>* warnings) {
    if (ds.empty()) throw DataError("split_80_20: dataset is empty");
    std::vector<bool> to_train(ds.size(), false);

    auto assign = [&](std::vector<size_t>& idx, Rng rng) {
        rng.shuffle(idx.begin(), idx.end());
        const size_t n_train = idx.size() * 4 / 5;  // floor(0.8 n)
        for (size_t i = 0; i < n_train; ++i) to_train[idx[i]] = true;
    };

    if (stratified) {
        for (int c = 0; c < 11; ++c) {
            std::vector<size_t> idx;
            for (size_t i = 0; i < ds.size(); ++i)
                if (ds.samples[i].label == c) idx.push_back(i);
            if (idx.empty()) continue;
            if (idx.size() < 2 && warnings)
                warnings->push_back("class '" + std::string(class_table()[size_t(c)].abbrev) +
                                    "' has fewer than 2 samples; one side of the split is empty");
            assign(idx, Rng::stream(seed, 0x517, uint64_t(c)));
        }
    } else {
        std::vector<size_t> idx(ds.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        assign(idx, Rng::stream(seed, 0x517, 0xffff));
    }

    Dataset train, val;
    train.image_size = val.image_size = ds.image_size;
    for (size_t i = 0; i < ds.size(); ++i)
        (to_train[i] ? train : val).samples.push_back(ds.samples[i]);
    return {std::move(train), std::move(val)};
}

namespace {

// Fixed, well-separated per-class base colors (hue wheel at s=0.6, v=0.85).
std::array<float, 3> class_color(int c) {
    const double h = 6.0 * double(c) / 11.0;
    const int si = int(h);
    const double f = h - si;
    const double v = 0.85, s = 0.6;
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (si % 6) {
        case 0: return {float(v), float(t), float(p)};
        case 1: return {float(q), float(v), float(p)};
        case 2: return {float(p), float(v), float(t)};
        case 3: return {float(p), float(q), float(v)};
        case 4: return {float(t), float(p), float(v)};
        default: return {float(v), float(p), float(q)};
    }
}

}  // namespace

void gen_synthetic(const std::filesystem::path& out_root, int num_per_class, int size,
                   uint64_t seed) {
    if (size < 8) throw UsageError("gen_synthetic: size must be >= 8");
    if (num_per_class < 1) throw UsageError("gen_synthetic: num_per_class must be >= 1");

    for (int c = 0; c < 11; ++c) {
        const auto dir = out_root / class_table()[size_t(c)].abbrev;
        std::filesystem::create_directories(dir);
        const auto base = class_color(c);
        // Class-specific stripe direction and frequency.
        const double fx = 1.0 + double(c % 4);
        const double fy = 1.0 + double(c / 4);
        for (int i = 0; i < num_per_class; ++i) {
            Rng rng = Rng::stream(seed, uint64_t(c), uint64_t(i));
            const double phase = rng.uniform(0.0, 6.283185307179586);
            const double amp = rng.uniform(0.10, 0.18);
            ImageU8 img;
            img.width = img.height = size;
            img.rgb.resize(size_t(size) * size_t(size) * 3);
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x) {
                    const double wave =
                        std::sin(6.283185307179586 * (fx * x + fy * y) / double(size) + phase);
                    const double noise = rng.uniform(-0.04, 0.04);
                    for (int ch = 0; ch < 3; ++ch) {
                        const double v = double(base[size_t(ch)]) + amp * wave + noise;
                        const double clamped = std::min(std::max(v, 0.0), 1.0);
                        img.rgb[(size_t(y) * size_t(size) + size_t(x)) * 3 + size_t(ch)] =
                            uint8_t(std::lround(clamped * 255.0));
                    }
                }
            char name[32];
            std::snprintf(name, sizeof name, "sample_%04d.ppm", i);
            const auto bytes = encode_ppm(img);
            std::ofstream os(dir / name, std::ios::binary);
            if (!os) throw DataError("gen_synthetic: cannot write " + (dir / name).string());
            os.write(reinterpret_cast<const char*>(bytes.data()),
                     std::streamsize(bytes.size()));
        }
    }
}

void write_manifest_csv(const Dataset& ds, std::ostream& os) {
    os << "path,class_index,width,height\n";
    for (const auto& s : ds.samples)
        os << s.path << "," << s.label << "," << s.orig_width << "," << s.orig_height << "\n";
}

}  // namespace ttml
