#pragma once

#include <Eigen/Core>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctex {

template <typename S>
using ArrX = Eigen::Array<S, Eigen::Dynamic, 1>;
template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dimension list; an empty shape denotes a scalar (one element, rank 0).
using Shape = std::vector<long>;

inline long numel(const Shape& shape) {
    long n = 1;
    for (long d : shape) n *= d;
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

[[noreturn]] inline void shape_fail(const std::string& op, const Shape& a) {
    throw ShapeError(op + ": unsupported shape " + shape_str(a));
}
[[noreturn]] inline void shape_fail(const std::string& op, const Shape& a, const Shape& b) {
    throw ShapeError(op + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

template <typename S>
class Tape;

// Handle to a tape node. Cheap to copy; valid while its tape lives.
template <typename S>
struct Var {
    Tape<S>* tape = nullptr;
    int id = -1;

    const Shape& shape() const;
    const ArrX<S>& value() const;
    long size() const { return numel(shape()); }
};

// Append-only record of primitive applications. Insertion order is a
// topological order, so reverse-mode differentiation is a single reverse
// sweep. One tape serves one thread; independent tapes may run concurrently.
template <typename S>
class Tape {
public:
    struct Node {
        Shape shape;
        ArrX<S> value;
        ArrX<S> grad;
        bool requires_grad = false;
        std::vector<int> parents;
        std::function<void(Tape<S>&, const Node&)> backward;
    };

    Var<S> leaf(ArrX<S> value, Shape shape, bool requires_grad) {
        if (value.size() != numel(shape)) {
            throw ShapeError("leaf: value length " + std::to_string(value.size()) +
                             " does not match shape " + shape_str(shape));
        }
        Node n;
        n.shape = std::move(shape);
        n.value = std::move(value);
        n.requires_grad = requires_grad;
        nodes_.push_back(std::move(n));
        return {this, static_cast<int>(nodes_.size()) - 1};
    }

    Var<S> constant(ArrX<S> value, Shape shape) { return leaf(std::move(value), std::move(shape), false); }

    Var<S> scalar_constant(S v) {
        ArrX<S> one(1);
        one[0] = v;
        return constant(std::move(one), Shape{});
    }

    Var<S> make(Shape shape, ArrX<S> value, std::vector<int> parents,
                std::function<void(Tape<S>&, const Node&)> backward) {
        Node n;
        n.shape = std::move(shape);
        n.value = std::move(value);
        n.parents = std::move(parents);
        for (int p : n.parents) {
            if (nodes_[static_cast<std::size_t>(p)].requires_grad) {
                n.requires_grad = true;
                break;
            }
        }
        n.backward = std::move(backward);
        nodes_.push_back(std::move(n));
        return {this, static_cast<int>(nodes_.size()) - 1};
    }

    Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
    const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
    int size() const { return static_cast<int>(nodes_.size()); }

    // Accumulates a gradient contribution into a parent node, skipping
    // parents outside the differentiated subgraph.
    void accum(int id, const ArrX<S>& contribution) {
        Node& n = node(id);
        if (!n.requires_grad) return;
        n.grad += contribution;
    }

    // Populates .grad of every requires_grad node reachable from `loss`,
    // which must be scalar. Gradients are reset on every call.
    void backward(Var<S> loss) {
        if (loss.tape != this) throw std::invalid_argument("backward: loss from another tape");
        const Node& ln = node(loss.id);
        if (numel(ln.shape) != 1) {
            throw ShapeError("backward: loss must be scalar, got shape " + shape_str(ln.shape));
        }
        for (Node& n : nodes_) {
            n.grad = ArrX<S>::Zero(n.value.size());
        }
        node(loss.id).grad[0] = S(1);
        for (int id = loss.id; id >= 0; --id) {
            const Node& n = node(id);
            if (n.backward && n.requires_grad) n.backward(*this, n);
        }
    }

    const ArrX<S>& grad(Var<S> v) const {
        const Node& n = node(v.id);
        if (n.grad.size() != n.value.size()) {
            throw std::logic_error("grad: backward has not run on this tape");
        }
        return n.grad;
    }

private:
    std::vector<Node> nodes_;
};

template <typename S>
const Shape& Var<S>::shape() const {
    return tape->node(id).shape;
}
template <typename S>
const ArrX<S>& Var<S>::value() const {
    return tape->node(id).value;
}

template <typename S>
inline void check_same_tape(const std::string& op, Var<S> a, Var<S> b) {
    if (a.tape != b.tape) throw std::invalid_argument(op + ": operands from different tapes");
}

}  // namespace ctex
