import os
import requests

URL = 'https://example.org/datasets/cells.zip'


def fetch(dest):
    if os.path.exists(dest):
        return dest
    r = requests.get(URL)
    with open(dest, 'wb') as fh:
        fh.write(r.content)
    return dest
