#include "fregan/autograd.hpp"

#include <cstring>
#include <stdexcept>

namespace fregan {

Parameter& ParamSet::add(const std::string& name, Dims dims)
{
    if (index_.count(name) != 0)
        throw std::invalid_argument("duplicate parameter name: " + name);
    index_[name] = params_.size();
    params_.push_back(Parameter{name, Tensor(dims), Tensor(dims)});
    return params_.back();
}

Parameter& ParamSet::at(const std::string& name)
{
    auto it = index_.find(name);
    if (it == index_.end())
        throw std::out_of_range("unknown parameter: " + name);
    return params_[it->second];
}

const Parameter& ParamSet::at(const std::string& name) const
{
    auto it = index_.find(name);
    if (it == index_.end())
        throw std::out_of_range("unknown parameter: " + name);
    return params_[it->second];
}

std::size_t ParamSet::scalar_count() const
{
    std::size_t n = 0;
    for (const auto& p : params_)
        n += p.value.size();
    return n;
}

void ParamSet::zero_grad()
{
    for (auto& p : params_)
        p.grad.fill(0.0);
}

bool ParamSet::all_finite() const
{
    for (const auto& p : params_)
        if (!p.value.all_finite())
            return false;
    return true;
}

std::uint64_t ParamSet::checksum() const
{
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& p : params_) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(p.value.data());
        for (std::size_t i = 0; i < p.value.size() * sizeof(double); ++i) {
            h ^= bytes[i];
            h *= 1099511628211ULL;
        }
    }
    return h;
}

const Tensor& Var::value() const
{
    return tape->value(id);
}

Var Tape::constant(Tensor value)
{
    nodes_.push_back(Node{std::move(value), Tensor(), nullptr, false});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Parameter& p)
{
    Node node{p.value, Tensor(), nullptr, recording_};
    if (recording_) {
        Parameter* target = &p;
        node.fn = [target](Tape&, const Tensor& g) { target->grad.add_inplace(g); };
    }
    nodes_.push_back(std::move(node));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::emit(Tensor value, std::initializer_list<Var> inputs, Backward fn)
{
    bool needs = false;
    if (recording_)
        for (const Var& v : inputs)
            needs = needs || (v.valid() && nodes_[v.id].needs_grad);
    nodes_.push_back(Node{std::move(value), Tensor(), needs ? std::move(fn) : nullptr, needs});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::emit(Tensor value, const std::vector<Var>& inputs, Backward fn)
{
    bool needs = false;
    if (recording_)
        for (const Var& v : inputs)
            needs = needs || (v.valid() && nodes_[v.id].needs_grad);
    nodes_.push_back(Node{std::move(value), Tensor(), needs ? std::move(fn) : nullptr, needs});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::grad(int id)
{
    Node& node = nodes_[id];
    if (node.grad.empty())
        node.grad = Tensor(node.value.dims());
    return node.grad;
}

void Tape::backward(Var root)
{
    if (!recording_)
        throw std::logic_error("backward on a tape that does not record gradients");
    if (root.tape != this)
        throw std::invalid_argument("backward root belongs to another tape");
    if (nodes_[root.id].value.size() != 1)
        throw std::invalid_argument("backward root must be a scalar, got " +
                                    to_string(nodes_[root.id].value.dims()));
    if (!nodes_[root.id].needs_grad)
        return;
    grad(root.id)[0] += 1.0;
    for (int id = root.id; id >= 0; --id) {
        Node& node = nodes_[id];
        if (!node.fn || node.grad.empty())
            continue;
        // Inputs always have smaller ids, so this node's buffer is final.
        const Tensor g = std::move(node.grad);
        node.grad = Tensor();
        node.fn(*this, g);
    }
}

void Tape::zero_grad()
{
    for (auto& node : nodes_)
        node.grad = Tensor();
}

Var ParamBinder::operator()(const std::string& name)
{
    auto it = cache_.find(name);
    if (it != cache_.end())
        return it->second;
    Var v = mutable_ ? tape_.leaf(mutable_->at(name)) : tape_.constant(frozen_->at(name).value);
    cache_.emplace(name, v);
    return v;
}

void init_normal(Tensor& t, double stddev, std::mt19937_64& rng)
{
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& x : t.values())
        x = dist(rng);
}

void init_uniform(Tensor& t, double bound, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& x : t.values())
        x = dist(rng);
}

} // namespace fregan
