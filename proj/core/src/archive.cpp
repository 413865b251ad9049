#include "cdo/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <unordered_map>

namespace cdo {
namespace {

constexpr char kMagic[8] = {'C', 'D', 'O', 'A', 'R', 'C', 'H', '1'};

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

}  // namespace

const Tensor* Archive::find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return &t;
    return nullptr;
}

void save_archive(const std::filesystem::path& path, const Archive& archive) {
    nlohmann::json header;
    header["meta"] = archive.meta;
    header["tensors"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : archive.tensors) {
        const Shape& s = t.shape();
        header["tensors"].push_back({{"name", name}, {"dims", {s.n, s.c, s.h, s.w}}, {"offset", offset}});
        offset += t.numel();
    }
    const std::string text = header.dump();
    const std::uint64_t len = text.size();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ArchiveError("cannot open for writing: " + path.string());
    out.write(kMagic, sizeof kMagic);
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, t] : archive.tensors)
        out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
    if (!out) throw ArchiveError("write failed: " + path.string());
}

Archive load_archive(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArchiveError("cannot open archive: " + path.string());
    char magic[8];
    std::uint64_t len = 0;
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw ArchiveError("not a CDO archive: " + path.string());
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw ArchiveError("truncated archive header: " + path.string());

    const auto header = nlohmann::json::parse(text);
    Archive a;
    a.meta = header.value("meta", nlohmann::json::object());
    const auto payload_start = in.tellg();
    for (const auto& e : header.at("tensors")) {
        std::vector<std::int64_t> dims = e.at("dims").get<std::vector<std::int64_t>>();
        // Exporters may write 0..4 torch dims; right-align them into NCHW.
        while (dims.size() < 4) dims.insert(dims.begin(), 1);
        if (dims.size() > 4) throw ArchiveError("tensor with more than four dims in " + path.string());
        Shape s{static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2]),
                static_cast<int>(dims[3])};
        Tensor t(s);
        const auto offset = e.at("offset").get<std::uint64_t>();
        in.seekg(payload_start + static_cast<std::streamoff>(offset * sizeof(float)));
        in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
        if (!in) throw ArchiveError("truncated payload for tensor " + e.at("name").get<std::string>());
        a.tensors.emplace_back(e.at("name").get<std::string>(), std::move(t));
    }
    return a;
}

std::vector<std::pair<std::string, Tensor>> capture_state(const nn::StateList& state) {
    std::vector<std::pair<std::string, Tensor>> out;
    out.reserve(state.size());
    for (const auto& s : state) out.emplace_back(s.name, *s.value);
    return out;
}

void restore_state(nn::StateList& state, const std::vector<std::pair<std::string, Tensor>>& tensors) {
    std::unordered_map<std::string, const Tensor*> index;
    for (const auto& [name, t] : tensors) index.emplace(name, &t);
    for (auto& s : state) {
        const auto it = index.find(s.name);
        if (it == index.end()) throw ArchiveError("missing tensor '" + s.name + "'");
        if (it->second->numel() != s.value->numel()) {
            throw ArchiveError("tensor '" + s.name + "' has " + std::to_string(it->second->numel()) +
                               " elements, expected " + std::to_string(s.value->numel()));
        }
        std::memcpy(s.value->data(), it->second->data(), s.value->numel() * sizeof(float));
    }
}

}  // namespace cdo
