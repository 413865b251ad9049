// feature_dump <weights_dir> <backbone> <taps,comma> <input.cdoa> <output.cdoa>
// Runs the expert on the tensor named "input" and stores one tensor per tap ("level<i>").

#include <cstdio>
#include <sstream>
#include <string>

#include "cdo/archive.hpp"
#include "cdo/features.hpp"

int main(int argc, char** argv) {
    if (argc != 6) {
        std::fprintf(stderr, "usage: %s <weights_dir> <backbone> <taps> <input.cdoa> <output.cdoa>\n", argv[0]);
        return 2;
    }
    try {
        std::vector<int> taps;
        std::stringstream ss(argv[3]);
        for (std::string t; std::getline(ss, t, ',');) taps.push_back(std::stoi(t));
        const auto expert = cdo::ExpertModel::load(cdo::parse_backbone(argv[2]), taps, argv[1]);
        const cdo::Archive in = cdo::load_archive(argv[4]);
        const cdo::Tensor* x = in.find("input");
        if (!x) throw std::runtime_error("input archive has no tensor named 'input'");
        const auto pyramid = expert.forward(*x);
        cdo::Archive out;
        for (std::size_t i = 0; i < pyramid.size(); ++i) out.tensors.emplace_back("level" + std::to_string(i), pyramid.levels[i]);
        cdo::save_archive(argv[5], out);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 1;
    }
    return 0;
}
