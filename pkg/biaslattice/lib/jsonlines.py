import json
import os

from .exceptions import MissingFileError, DataError


def write_jsonl(path, records):
    '''Write an iterable of JSON-serializable dicts, one per line.'''
    with open(path, 'w', encoding='utf-8') as outf:
        for rec in records:
            outf.write(json.dumps(rec, sort_keys=True))
            outf.write('\n')


def append_jsonl(path, record):
    with open(path, 'a', encoding='utf-8') as outf:
        outf.write(json.dumps(record, sort_keys=True))
        outf.write('\n')


def read_jsonl(path):
    if not os.path.exists(path):
        raise MissingFileError(path)
    records = []
    with open(path, 'r', encoding='utf-8') as inf:
        for lineno, line in enumerate(inf, 1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except ValueError as e:
                raise DataError("Bad JSON on line {} of {}: {}".format(lineno, path, e))
    return records
