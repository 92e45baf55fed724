'''Library proper: numerics, transducer, adapters, decoding, data, training and evaluation.'''
