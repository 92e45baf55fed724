import json
import os
from enum import IntEnum
from collections import namedtuple

from ..exceptions import CatalogError, MissingFileError


class EntityType(IntEnum):
    ProperName = 0
    Appliance = 1
    DeviceLocation = 2

    @staticmethod
    def parse(name):
        if name is None:
            return None
        if isinstance(name, EntityType):
            return name
        try:
            return EntityType[name]
        except KeyError:
            raise CatalogError("Unknown entity type {}; expected one of {}".format(
                name, ', '.join(t.name for t in EntityType)))


# type-embedding rows beyond the closed set
NO_BIAS_TYPE_ID = len(EntityType)
UNTYPED_ID = len(EntityType) + 1
TYPE_TABLE_ROWS = len(EntityType) + 2

Entity = namedtuple('Entity', ['text', 'type'])


class Catalog(object):
    '''
    An ordered list of entities c_1..c_K, each with an optional
    EntityType.  The <no_bias> pseudo-entity is not stored here; the
    catalog encoder appends it.
    '''
    __slots__ = ['_entities']

    def __init__(self, entities=()):
        ents = []
        for e in entities:
            if isinstance(e, str):
                e = Entity(e, None)
            elif not isinstance(e, Entity):
                e = Entity(e[0], EntityType.parse(e[1]) if len(e) > 1 else None)
            if not e.text or not e.text.strip():
                raise CatalogError("Catalog entities must be non-empty strings")
            ents.append(Entity(e.text.strip().lower(), EntityType.parse(e.type)))
        self._entities = tuple(ents)

    @property
    def entities(self):
        return self._entities

    @property
    def K(self):
        return len(self._entities)

    def __len__(self):
        return len(self._entities)

    def __iter__(self):
        return iter(self._entities)

    def __getitem__(self, i):
        return self._entities[i]

    def __contains__(self, text):
        return any(e.text == text for e in self._entities)

    def __eq__(self, other):
        return isinstance(other, Catalog) and self._entities == other._entities

    def texts(self):
        return [e.text for e in self._entities]

    def permuted(self, order):
        return Catalog([self._entities[i] for i in order])

    def __str__(self):
        return 'Catalog({})'.format(', '.join(e.text for e in self._entities))


def save_catalog(catalog, path):
    '''JSON lines, each {"entity": str, "type": str or null}.'''
    with open(path, 'w', encoding='utf-8') as outf:
        for e in catalog:
            rec = {'entity': e.text, 'type': e.type.name if e.type is not None else None}
            outf.write(json.dumps(rec) + '\n')


def load_catalog(path):
    if not os.path.exists(path):
        raise MissingFileError(path, "catalog file")
    ents = []
    with open(path, 'r', encoding='utf-8') as inf:
        for lineno, line in enumerate(inf, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except ValueError:
                raise CatalogError("Bad catalog line {} in {}".format(lineno, path))
            if 'entity' not in rec:
                raise CatalogError("Catalog line {} in {} has no entity".format(lineno, path))
            ents.append(Entity(rec['entity'], EntityType.parse(rec.get('type'))))
    return Catalog(ents)
