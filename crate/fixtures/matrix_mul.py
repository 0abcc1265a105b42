import torch


def handler(request):
    a = torch.rand(request.n, request.n)
    b = torch.rand(request.n, request.n)
    return torch.matmul(a, b)
