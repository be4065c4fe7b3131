#include "ttml/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace ttml {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

namespace {
constexpr char kMagic[8] = {'T', 'T', 'N', 'N', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), 4);
}

uint32_t get_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
}  // namespace

void write_checkpoint(const std::filesystem::path& path, const nlohmann::json& meta,
                      const std::vector<NamedTensor>& tensors) {
    nlohmann::json manifest;
    manifest["meta"] = meta;
    auto& list = manifest["tensors"] = nlohmann::json::array();
    for (const auto& nt : tensors) {
        nlohmann::json entry;
        entry["name"] = nt.name;
        entry["shape"] = nt.tensor.shape;
        list.push_back(entry);
    }
    const std::string mstr = manifest.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("checkpoint: cannot open for writing: " + path.string());
    os.write(kMagic, 8);
    put_u32(os, kVersion);
    put_u32(os, uint32_t(mstr.size()));
    os.write(mstr.data(), std::streamsize(mstr.size()));
    for (const auto& nt : tensors)
        os.write(reinterpret_cast<const char*>(nt.tensor.ptr()),
                 std::streamsize(nt.tensor.size() * 4));
    if (!os) throw DataError("checkpoint: write failed: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open: " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw DataError("checkpoint: bad magic in " + path.string());
    const uint32_t version = get_u32(is);
    if (version != kVersion)
        throw DataError("checkpoint: unsupported version " + std::to_string(version));
    const uint32_t mlen = get_u32(is);
    std::string mstr(mlen, '\0');
    is.read(mstr.data(), mlen);
    if (!is) throw DataError("checkpoint: truncated manifest in " + path.string());

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(mstr);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint: manifest is not valid JSON: " + std::string(e.what()));
    }

    Checkpoint ck;
    ck.meta = manifest.value("meta", nlohmann::json::object());
    for (const auto& entry : manifest.at("tensors")) {
        const std::string name = entry.at("name").get<std::string>();
        Shape shape = entry.at("shape").get<Shape>();
        Tensor t = zeros(shape);
        is.read(reinterpret_cast<char*>(t.mut()), std::streamsize(t.size() * 4));
        if (!is) throw DataError("checkpoint: truncated buffer for tensor '" + name + "'");
        ck.order.push_back(name);
        ck.tensors.emplace(name, std::move(t));
    }
    return ck;
}

}  // namespace ttml
