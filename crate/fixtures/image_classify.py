import torch


def handler(image):
    batch = torch.zeros(1, 3, 224, 224)
    features = torch.conv2d(batch, kernels)
    scores = classify(features)
    return scores
