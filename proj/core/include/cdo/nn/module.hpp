#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cdo/tensor.hpp"

namespace cdo::nn {

// How a forward pass runs. `training` selects batch statistics in normalisation layers and
// updates their running estimates; `record` keeps the activations needed by backward().
// A pass with record == false and training == false never mutates the module.
struct Pass {
    bool training = false;
    bool record = false;

    static constexpr Pass inference() { return {false, false}; }
    static constexpr Pass train() { return {true, true}; }
};

struct Parameter {
    Tensor value;
    Tensor grad;

    Parameter() = default;
    explicit Parameter(Shape s) : value(s), grad(s) {}
};

enum class Role { conv_weight, norm_scale, shift, running_mean, running_var };

// A named view onto module state. Learnable parameters carry a gradient; buffers
// (running statistics) do not.
struct NamedTensor {
    std::string name;
    Tensor* value = nullptr;
    Tensor* grad = nullptr;
    Role role = Role::conv_weight;

    bool trainable() const { return grad != nullptr; }
};

using StateList = std::vector<NamedTensor>;

inline std::string join_name(const std::string& prefix, const std::string& name) {
    if (prefix.empty()) return name;
    if (name.empty()) return prefix;
    return prefix + "." + name;
}

class Module {
public:
    virtual ~Module() = default;

    virtual Tensor forward(const Tensor& x, const Pass& pass) = 0;
    // Gradient w.r.t. the input of the last recorded forward; accumulates parameter gradients.
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual void collect(const std::string& prefix, StateList& out) { (void)prefix, (void)out; }
    // Drops recorded activations.
    virtual void clear_cache() {}
};

using ModulePtr = std::unique_ptr<Module>;

// Sequential container with optionally named children. An empty child name does not add a
// path component to parameter names.
class Sequential final : public Module {
public:
    Sequential() = default;
    Sequential& add(std::string name, ModulePtr m) {
        children_.emplace_back(std::move(name), std::move(m));
        return *this;
    }
    Sequential& add(ModulePtr m) { return add(std::to_string(children_.size()), std::move(m)); }
    std::size_t size() const { return children_.size(); }
    bool empty() const { return children_.empty(); }

    Tensor forward(const Tensor& x, const Pass& pass) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect(const std::string& prefix, StateList& out) override;
    void clear_cache() override;

private:
    std::vector<std::pair<std::string, ModulePtr>> children_;
};

}  // namespace cdo::nn
