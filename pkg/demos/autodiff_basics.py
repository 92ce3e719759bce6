"""
Reverse-mode autodiff on numpy arrays
=====================================

A short tour of the tensor core: build a small graph, backpropagate, and
compare the analytic gradient with central differences.
"""

import numpy as np

from discolab.tensor import Tensor, conv2d, finite_diff_check, linear, relu, reshape, softmax_cross_entropy

rng = np.random.default_rng(0)

# A leaf tensor asks for a gradient; everything computed from it records
# how to send gradients back.
x = Tensor(rng.normal(size=(2, 3, 6, 6)), requires_grad=True)
w = Tensor(rng.normal(size=(4, 3, 3, 3)) * 0.3, requires_grad=True)
fc = Tensor(rng.normal(size=(5, 4 * 6 * 6)) * 0.1, requires_grad=True)

h = relu(conv2d(x, w, padding=1))
logits = linear(reshape(h, (2, -1)), fc)
loss = softmax_cross_entropy(logits, np.array([1, 3]))
loss.backward()
print("loss", float(loss.data))
print("input grad shape", x.grad.shape, "weight grad norm", np.linalg.norm(w.grad))

# The same composite, checked against central differences in double precision.
labels = np.array([1, 3])


def composite(t):
    return softmax_cross_entropy(linear(reshape(relu(conv2d(t, w, padding=1)), (2, -1)), fc), labels)


print("max relative error", finite_diff_check(composite, x.data))
