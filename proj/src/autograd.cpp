#include "dseg/autograd.hpp"

#include <unordered_set>

namespace dseg {

namespace {
thread_local bool g_grad_enabled = true;
thread_local MacCounter* g_counter = nullptr;
}  // namespace

bool GradMode::enabled() { return g_grad_enabled; }
void GradMode::set(bool on) { g_grad_enabled = on; }

MacCounter::MacCounter() : outer_(g_counter) { g_counter = this; }
MacCounter::~MacCounter() {
    g_counter = outer_;
    if (outer_) outer_->macs_ += macs_;
}

void MacCounter::record(std::uint64_t macs) {
    if (g_counter) g_counter->macs_ += macs;
}

template <class T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> parents,
                   std::function<void(Node<T>&)> backward) {
    Var<T> out(std::move(value));
    if (!GradMode::enabled() || out.is_meta()) return out;
    bool any = false;
    for (const auto& p : parents) any = any || p.requires_grad();
    if (!any) return out;
    auto& node = *out.node();
    node.requires_grad = true;
    node.backward = std::move(backward);
    node.parents.reserve(parents.size());
    for (auto& p : parents) node.parents.push_back(p.node());
    return out;
}

template <class T>
void backward(const Var<T>& root) {
    DSEG_CHECK(root.defined() && root.value().numel() == 1, "root must be a scalar");
    if (!root.requires_grad()) return;

    // Iterative post-order DFS gives a topological order without recursion depth limits.
    using NodePtr = std::shared_ptr<Node<T>>;
    std::vector<NodePtr> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<NodePtr, std::size_t>> stack{{root.node(), 0}};
    seen.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            const NodePtr p = node->parents[next++];
            if (p->requires_grad && seen.insert(p.get()).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // The graph is consumed: closures, parent links and interior gradients
    // are released as soon as each node has propagated.
    root.node()->grad_buffer()[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>& n = **it;
        if (n.backward) {
            if (n.grad.shape() == n.value.shape() && !n.grad.is_meta()) n.backward(n);
            n.backward = nullptr;
            n.parents.clear();
            n.grad = Tensor<T>();
        }
        it->reset();
    }
}

template Var<float> make_result(Tensor<float>, std::vector<Var<float>>,
                                std::function<void(Node<float>&)>);
template Var<double> make_result(Tensor<double>, std::vector<Var<double>>,
                                 std::function<void(Node<double>&)>);
template void backward(const Var<float>&);
template void backward(const Var<double>&);

}  // namespace dseg
