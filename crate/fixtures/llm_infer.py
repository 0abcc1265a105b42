import torch


def handler(request):
    tokens = tokenize(request.prompt)
    hidden = torch.matmul(tokens, weights)
    logits = torch.matmul(hidden, head)
    return decode(logits)
