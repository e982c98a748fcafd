#pragma once

#include "fregan/tensor.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace fregan {

// A learnable tensor with its accumulated gradient.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
};

// Ordered, name-addressable collection of parameters for one network.
// Element addresses are stable once the set is built, which lets a tape
// hold pointers to parameters for the lifetime of a step.
class ParamSet {
public:
    Parameter& add(const std::string& name, Dims dims);
    Parameter& at(const std::string& name);
    const Parameter& at(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    std::size_t size() const { return params_.size(); }
    std::size_t scalar_count() const;
    std::vector<Parameter>& items() { return params_; }
    const std::vector<Parameter>& items() const { return params_; }

    void zero_grad();
    bool all_finite() const;
    // FNV-1a over the raw bytes of every parameter value.
    std::uint64_t checksum() const;

private:
    std::vector<Parameter> params_;
    std::map<std::string, std::size_t> index_;
};

class Tape;

// Handle to a node recorded on a tape.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    const Tensor& value() const;
    const Dims& dims() const { return value().dims(); }
    bool valid() const { return tape != nullptr && id >= 0; }
};

// Reverse-mode recorder. Nodes are appended in evaluation order, so the
// reverse of insertion order is a valid topological order for backward.
// A tape built with record_gradients = false keeps no backward closures
// and is the inference path.
class Tape {
public:
    using Backward = std::function<void(Tape&, const Tensor& grad_out)>;

    explicit Tape(bool record_gradients = true) : recording_(record_gradients) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool recording() const { return recording_; }

    Var constant(Tensor value);
    // Gradient flowing into this leaf is added to p.grad during backward.
    Var leaf(Parameter& p);

    // Records an op result. `inputs` decides whether the node takes part in
    // backward; `fn` is dropped when nothing upstream needs a gradient.
    Var emit(Tensor value, std::initializer_list<Var> inputs, Backward fn);
    Var emit(Tensor value, const std::vector<Var>& inputs, Backward fn);

    const Tensor& value(int id) const { return nodes_[id].value; }
    bool needs_grad(int id) const { return nodes_[id].needs_grad; }
    // Lazily zero-initialised gradient buffer for node `id`.
    Tensor& grad(int id);

    // Seeds d(root)/d(root) = 1; root must be a single element.
    void backward(Var root);
    void zero_grad();
    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        Backward fn;
        bool needs_grad = false;
    };
    std::vector<Node> nodes_;
    bool recording_;
};

// Resolves parameter names to tape leaves, creating each leaf once per tape.
// Bound to a mutable set, gradients accumulate into it; bound to a const set,
// parameters enter the tape as constants.
class ParamBinder {
public:
    ParamBinder(Tape& tape, ParamSet& params) : tape_(tape), mutable_(&params), frozen_(&params) {}
    ParamBinder(Tape& tape, const ParamSet& params) : tape_(tape), frozen_(&params) {}

    Var operator()(const std::string& name);
    Tape& tape() { return tape_; }
    bool has(const std::string& name) const { return frozen_->contains(name); }
    const ParamSet& params() const { return *frozen_; }

private:
    Tape& tape_;
    ParamSet* mutable_ = nullptr;
    const ParamSet* frozen_ = nullptr;
    std::map<std::string, Var> cache_;
};

// Weight initialisers used by the model builders.
void init_normal(Tensor& t, double stddev, std::mt19937_64& rng);
void init_uniform(Tensor& t, double bound, std::mt19937_64& rng);

} // namespace fregan
