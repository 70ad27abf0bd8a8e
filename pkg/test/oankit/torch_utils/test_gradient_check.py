import torch

from oankit.torch_utils.gradient_check import max_relative_error
from oankit.torch_utils.gradient_check import numerical_gradient
from oankit.torch_utils.set_all_random_seed import set_all_random_seed


class WrongSquare(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x):
        ctx.save_for_backward(x)
        return x * x

    @staticmethod
    def backward(ctx, grad_output):
        (x,) = ctx.saved_tensors
        return grad_output * x


def test_numerical_gradient():
    x = torch.tensor([1.0, -2.0, 0.5], dtype=torch.float64)
    grad = numerical_gradient(lambda v: v**3, [x], 0)
    torch.testing.assert_close(grad, 3 * x**2, rtol=1e-6, atol=1e-8)


def test_correct_backward_passes():
    x = torch.randn(4, 3, dtype=torch.float64, requires_grad=True)
    w = torch.randn(3, 2, dtype=torch.float64, requires_grad=True)
    assert max_relative_error(lambda a, b: torch.tanh(a @ b), [x, w]) < 1e-6


def test_wrong_backward_is_caught():
    x = (torch.rand(5, dtype=torch.float64) + 0.5).requires_grad_()
    assert max_relative_error(WrongSquare.apply, [x]) > 0.4


def test_only_inputs_requiring_grad_are_checked():
    x = torch.randn(3, dtype=torch.float64, requires_grad=True)
    frozen = torch.randn(3, dtype=torch.float64)
    assert max_relative_error(lambda a, b: a * b, [x, frozen]) < 1e-6


def test_set_all_random_seed():
    set_all_random_seed(3)
    a = torch.rand(4)
    set_all_random_seed(3)
    assert torch.equal(a, torch.rand(4))
