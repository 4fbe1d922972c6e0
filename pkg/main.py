from api.router import cli

if __name__ == "__main__":
    cli()
