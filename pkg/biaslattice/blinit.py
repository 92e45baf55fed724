import json
import os
import sys
import traceback

from biaslattice import __version__
from biaslattice.lib.logging import *
from biaslattice.lib.exceptions import BiasLatticeException, MissingFileError
from biaslattice.lib.config import load_config, section, apply_overrides, apply_seed_env, write_run_manifest
from biaslattice.lib.jsonlines import write_jsonl, read_jsonl
from biaslattice.lib.tokenizer import Vocab
from biaslattice.lib.data import (SynthConfig, gen_corpus, save_corpus, load_dataset, load_lexicons,
                                  load_vocab)
from biaslattice.lib.transducer import TransducerConfig
from biaslattice.lib.adapters import AdapterConfig, load_catalog, parameter_census
from biaslattice.lib.decode import decode_settings, decode_dataset, top_hypotheses
from biaslattice.lib.train import TrainConfig, pretrain, train_adapters, full_finetune
from biaslattice.lib.checkpoint import save_model, load_model, save_adapters, load_adapters, params_checksum
from biaslattice.lib.eval import EvalReport, evaluate, compare, render_table
from biaslattice.sweep import run_sweep


def _config(args, overrides, path=None):
    '''File config, then flags, then BIASLATTICE_SEED.'''
    cfg = apply_overrides(load_config(path or args.config), overrides)
    if args.seed is not None:
        cfg = apply_seed_env(cfg)
    return cfg


def _manifest_for_file(args, path, cfg):
    outdir = os.path.dirname(os.path.abspath(path))
    write_run_manifest(outdir, args.command, args.argv, cfg, __version__,
                       os.path.basename(path) + '.manifest.json')


def _dataset(datadir, split):
    return load_dataset(os.path.join(datadir, '{}.jsonl'.format(split)))


def _synth_feature_dim(datadir):
    path = os.path.join(datadir, 'synth_config.json')
    if not os.path.exists(path):
        raise MissingFileError(path, "synthesis config")
    with open(path) as inf:
        return json.load(inf)['feature_dim']


def _fresh_log(path):
    if os.path.exists(path):
        os.remove(path)
    return path


def cmd_gen_data(args):
    cfg = _config(args, {'synth.seed': args.seed})
    synth = SynthConfig.from_dict(section(cfg, 'synth'))
    corpus = gen_corpus(synth)
    save_corpus(corpus, args.out)
    write_run_manifest(args.out, args.command, args.argv, cfg, __version__)
    for split, utts in corpus.splits.items():
        log_info("{}: {} utterance(s)".format(split, len(utts)))
    print("Wrote corpus to {}".format(args.out))


def cmd_pretrain(args):
    cfg = _config(args, {'train.seed': args.seed, 'train.max_epochs': args.epochs})
    vocab = load_vocab(args.data)
    mcfg = section(cfg, 'model')
    mcfg['vocab_size'] = len(vocab)
    mcfg['feature_dim'] = _synth_feature_dim(args.data)
    model_cfg = TransducerConfig.from_dict(mcfg)
    tcfg = section(cfg, 'train')
    tcfg['mode'] = 'pretrain'
    train_cfg = TrainConfig.from_dict(tcfg)
    os.makedirs(args.out, exist_ok=True)
    result = pretrain(train_cfg, model_cfg, _dataset(args.data, 'pretrain'), _dataset(args.data, 'dev'),
                      _fresh_log(os.path.join(args.out, 'train_log.jsonl')))
    save_model(args.out, result.model, vocab, {'best_dev_loss': result.best_dev_loss})
    write_run_manifest(args.out, args.command, args.argv, cfg, __version__)
    print("Base model: {} parameters, best dev loss {:.4f}, saved to {}".format(
        result.model.census(), result.best_dev_loss, args.out))


def cmd_train_adapters(args):
    use_types = True if args.types else (False if args.no_types else None)
    cfg = _config(args, {
        'train.seed': args.seed, 'train.max_epochs': args.epochs, 'train.catalog_size': args.catalog_size,
        'train.train_fraction': args.train_fraction, 'adapters.variant': args.variant,
        'adapters.use_types': use_types, 'adapters.use_no_bias': False if args.no_nobias else None,
    })
    model, vocab, _ = load_model(args.base)
    base_sum = params_checksum(model.params)
    adapter_cfg = AdapterConfig.from_dict(section(cfg, 'adapters'))
    tcfg = section(cfg, 'train')
    tcfg['mode'] = args.mode
    train_cfg = TrainConfig.from_dict(tcfg)
    lexicons = load_lexicons(args.data)
    os.makedirs(args.out, exist_ok=True)
    log_path = _fresh_log(os.path.join(args.out, 'train_log.jsonl'))
    trainer = train_adapters if args.mode == 'adapter' else full_finetune
    result = trainer(train_cfg, model, adapter_cfg, _dataset(args.data, 'mixed'), _dataset(args.data, 'dev-mixed'),
                     lexicons, vocab, log_path)
    extra = {'mode': args.mode, 'base': os.path.abspath(args.base), 'base_checksum': base_sum,
             'best_dev_loss': result.best_dev_loss}
    if args.mode == 'full-finetune':
        out_base = args.out_base or args.out.rstrip(os.sep) + '-base'
        save_model(out_base, result.model, vocab, {'finetuned_from': os.path.abspath(args.base)})
        extra['base'] = os.path.abspath(out_base)
        log_info("Fine-tuned base written to {}".format(out_base))
    save_adapters(args.out, result.adapters, extra)
    write_run_manifest(args.out, args.command, args.argv, cfg, __version__)
    census = parameter_census(result.adapters, model)
    print("Adapters ({}, {}): {} parameters ({:.2%} of the total), best dev loss {:.4f}, saved to {}".format(
        adapter_cfg.variant, args.mode, census.adapter, census.fraction, result.best_dev_loss, args.out))


def cmd_decode(args):
    cfg = _config(args, {
        'experiment.seed': args.seed, 'experiment.beam': args.beam, 'experiment.greedy': args.greedy,
        'experiment.sf_lambda': args.sf_lambda, 'experiment.catalog_size': args.catalog_size,
        'experiment.random_catalog': args.random_catalog, 'experiment.types': args.types,
    })
    settings = decode_settings(section(cfg, 'experiment'))
    model, vocab, _ = load_model(args.base)
    adapters = None
    if args.adapters is not None:
        adapters, _ = load_adapters(args.adapters)
    catalog = load_catalog(args.catalog) if args.catalog is not None else None
    lexicons = load_lexicons(args.lexicons) if args.lexicons is not None else None
    utts = load_dataset(args.infile)
    records, dumps = decode_dataset(model, vocab, utts, settings, adapters, lexicons, catalog,
                                    dump=args.dump_attention is not None)
    write_jsonl(args.out, records)
    if args.dump_attention is not None:
        write_jsonl(args.dump_attention, dumps)
    _manifest_for_file(args, args.out, cfg)
    print("Wrote {} n-best list(s) to {}".format(len(records), args.out))


def cmd_eval(args):
    cfg = _config(args, {})
    refs = load_dataset(args.refs)
    vocab_path = args.vocab or os.path.join(os.path.dirname(os.path.abspath(args.refs)), 'vocab.json')
    vocab = Vocab.load(vocab_path)
    split = os.path.splitext(os.path.basename(args.refs))[0]
    name = args.name or os.path.splitext(os.path.basename(args.hyps))[0]
    report = evaluate(name, split, refs, top_hypotheses(read_jsonl(args.hyps)), vocab)
    if args.baseline is not None:
        compare(report, EvalReport.from_json(args.baseline))
    report.to_json(args.out)
    _manifest_for_file(args, args.out, cfg)
    rows = []
    for s, r in sorted(report.splits.items()):
        werr = report.werr.get(s)
        rows.append({'set': s, 'WER': 100 * r['wer'], 'WERR': '' if werr is None else 100 * werr})
    for t, e in sorted(report.ne_wer.items()):
        ne_werr = report.ne_werr.get(t)
        rows.append({'set': 'NE ' + t, 'WER': 100 * e['ne_wer'], 'WERR': '' if ne_werr is None else 100 * ne_werr})
    print(render_table(rows, ['set', 'WER', 'WERR'], title=name))


def cmd_sweep(args):
    seeds = None if args.seed is None else [args.seed]
    cfg = _config(args, {'experiment.seed': args.seed, 'experiment.seeds': seeds}, args.spec)
    run_sweep(cfg, args.argv, jobs=args.jobs)


def cmd_census(args):
    model, _, _ = load_model(args.base)
    rows = [{'part': 'base', 'parameters': model.census()}]
    if args.adapters is not None:
        adapters, _ = load_adapters(args.adapters)
        c = parameter_census(adapters, model)
        rows.append({'part': 'adapters ({})'.format(adapters.variant.value), 'parameters': c.adapter})
        rows.append({'part': 'adapter fraction', 'parameters': '{:.2%}'.format(c.fraction)})
    print(render_table(rows, ['part', 'parameters'], title='Parameter census'))


_COMMANDS = {
    'gen-data': cmd_gen_data,
    'pretrain': cmd_pretrain,
    'train-adapters': cmd_train_adapters,
    'decode': cmd_decode,
    'eval': cmd_eval,
    'sweep': cmd_sweep,
    'census': cmd_census,
}


def start_framework(args, argv=None):
    '''
    Run one subcommand.  Returns the process exit status: 0 on success,
    the exception's exit_code for a BiasLatticeException, 1 otherwise.
    '''
    setup_logging(args.debug, args.logfile)
    args.argv = list(argv if argv is not None else sys.argv)
    try:
        _COMMANDS[args.command](args)
    except BiasLatticeException as e:
        log_failure(str(e))
        return e.exit_code
    except Exception as e:
        log_failure("Unexpected error: {}".format(e))
        if args.debug:
            log_debug(traceback.format_exc())
        return 1
    return 0
