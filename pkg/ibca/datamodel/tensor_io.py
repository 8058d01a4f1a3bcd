"""
Self-describing raw tensor files.

Layout::

    IBCA-RAW 1
    dtype=<f4
    shape=4,16
    end
    <row-major payload, exactly prod(shape) * itemsize bytes>

Any reader that can split four text lines and reinterpret the remaining
bytes with the given numpy dtype string can load these files.
"""
import numpy as np

from ibca.error_handlers import DataException

MAGIC = 'IBCA-RAW 1'


def write_raw(path, array):
    array = np.ascontiguousarray(array)
    if array.dtype.byteorder == '=':
        array = array.astype(array.dtype.newbyteorder('<'))
    header = '{}\ndtype={}\nshape={}\nend\n'.format(
        MAGIC, array.dtype.str, ','.join(str(s) for s in array.shape))
    with open(path, 'wb') as fh:
        fh.write(header.encode('ascii'))
        fh.write(array.tobytes(order='C'))


def read_raw(path):
    with open(path, 'rb') as fh:
        lines = [fh.readline().decode('ascii').rstrip('\n') for _ in range(4)]
        payload = fh.read()
    if lines[0] != MAGIC or lines[3] != 'end':
        raise DataException('{} is not an {} file'.format(path, MAGIC))
    dtype = np.dtype(lines[1].split('=', 1)[1])
    shape_text = lines[2].split('=', 1)[1]
    shape = tuple(int(s) for s in shape_text.split(',')) if shape_text else ()
    expected = int(np.prod(shape)) * dtype.itemsize
    if len(payload) != expected:
        raise DataException('{}: payload has {} bytes, header implies {}'.format(path, len(payload), expected))
    return np.frombuffer(payload, dtype=dtype).reshape(shape)
