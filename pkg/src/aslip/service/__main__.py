"""Run the planning service with uvicorn: ``python3 -m aslip.service``."""
import argparse


def main(argv=None):
    p = argparse.ArgumentParser(prog="aslip-serve")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    args = p.parse_args(argv)
    import uvicorn
    uvicorn.run("aslip.service:app", host=args.host, port=args.port)


if __name__ == "__main__":
    main()
