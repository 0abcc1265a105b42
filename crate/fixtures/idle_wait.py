import time

import torch


def handler(request):
    time.sleep(request.wait_time)
    return "ok"
